use pasta_core::controller::{ControllerConfig, ControllerState};
use pasta_core::metrics::{hypervolume, non_dominated};
use pasta_core::pcgrad::{measure_conflicts, project_conflicts, GradientSet};
use pasta_core::scalarize::{maintenance_mix, stch_attention, stch_scalarize, tch_worst_index};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn simplex(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, m).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..6).prop_flat_map(|m| (simplex(m), prop::collection::vec(0.0f64..1.0, m)))
}

proptest! {
    #[test]
    fn attention_lies_on_the_simplex((w, r) in case(), mu in 0.01f64..10.0, rho in 0.0f64..1.0) {
        let z = vec![1.05; w.len()];
        let delta = stch_attention(&r, &w, &z, mu).unwrap();
        let eta = maintenance_mix(&delta, rho).unwrap();
        for v in [&delta, &eta] {
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(v.iter().all(|x| *x >= 0.0));
        }
        let floor = rho / w.len() as f64;
        prop_assert!(eta.iter().all(|x| *x >= floor - 1e-15));
    }

    #[test]
    fn smooth_value_brackets_the_max((w, r) in case(), mu in 0.01f64..10.0) {
        let m = w.len();
        let z = vec![1.05; m];
        let s = stch_scalarize(&r, &w, &z, mu).unwrap();
        let (_, dev) = tch_worst_index(&r, &w, &z);
        let worst = dev.iter().cloned().fold(f64::MIN, f64::max);
        // -mu log sum exp(d/mu) lies in [-worst - mu ln m, -worst].
        prop_assert!(s <= -worst + 1e-12);
        prop_assert!(s >= -worst - mu * (m as f64).ln() - 1e-12);
    }

    #[test]
    fn conflict_ratio_and_projection(seed in any::<u64>(), m in 2usize..6, d in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grads: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..d).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect())
            .collect();
        let set = GradientSet::new(grads.clone()).unwrap();
        let k = measure_conflicts(&set);
        prop_assert!((0.0..=1.0).contains(&k));
        let p = project_conflicts(&set, &mut rng).unwrap();
        prop_assert!((0.0..=1.0).contains(&p.kappa));
        prop_assert_eq!(p.visits.len(), m * (m - 1));
        let found = p.visits.iter().filter(|v| v.dot < 0.0).count();
        prop_assert_eq!(p.kappa, found as f64 / (m * (m - 1)) as f64);
        // Projection never lengthens a gradient.
        for (a, b) in grads.iter().zip(&p.projected.grads) {
            let n = |g: &[f64]| g.iter().map(|x| x * x).sum::<f64>();
            prop_assert!(n(b) <= n(a) * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn controller_stays_in_range(kappas in prop::collection::vec(0.0f64..1.0, 1..300)) {
        let cfg = ControllerConfig::with_horizon(kappas.len() as u64);
        let mut c = ControllerState::new(cfg).unwrap();
        for k in kappas {
            let t = c.step(k);
            prop_assert!(t.beta >= 0.0 && t.beta <= 1.0);
            prop_assert!(t.mu >= cfg.mu_min - 1e-12 && t.mu <= cfg.mu_max + 1e-12);
            prop_assert!(t.mu_star >= t.mu_base - 1e-12);
        }
    }

    #[test]
    fn dominated_points_add_no_volume(pts in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..12)) {
        let hv = hypervolume(&pts);
        prop_assert!((0.0..=1.0).contains(&hv));
        let front: Vec<Vec<f64>> = non_dominated(&pts).into_iter().map(|i| pts[i].clone()).collect();
        prop_assert!((hypervolume(&front) - hv).abs() < 1e-12);
        let mut more = pts.clone();
        more.push(vec![0.5, 0.5, 0.5]);
        prop_assert!(hypervolume(&more) >= hv - 1e-12);
    }
}
