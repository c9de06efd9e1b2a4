//! Deterministic multi-objective test problems for checking scalarizers
//! without any RL noise. Objectives here are minimised.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SyntheticMop {
    /// `f1 = x^2`, `f2 = (x - 1)^2` on `[-0.5, 1.5]`; convex front.
    Convex,
    /// `f_i = 1 - exp(-||x - a_i||^2)` on `[-h, h]^2` with anchors `(±a, 0)`;
    /// the front is concave, so weighted sums collapse onto its endpoints.
    Concave { anchor: f64, half_width: f64 },
}

impl SyntheticMop {
    pub fn concave() -> Self {
        SyntheticMop::Concave {
            anchor: 1.5,
            half_width: 1.5,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SyntheticMop::Convex => 1,
            SyntheticMop::Concave { .. } => 2,
        }
    }

    pub fn objectives(&self) -> usize {
        2
    }

    /// Decision box, per coordinate.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            SyntheticMop::Convex => (-0.5, 1.5),
            SyntheticMop::Concave { half_width, .. } => (-half_width, half_width),
        }
    }

    fn anchors(&self) -> [[f64; 2]; 2] {
        match *self {
            SyntheticMop::Concave { anchor, .. } => [[-anchor, 0.0], [anchor, 0.0]],
            SyntheticMop::Convex => [[0.0; 2]; 2],
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        match self {
            SyntheticMop::Convex => vec![x[0] * x[0], (x[0] - 1.0) * (x[0] - 1.0)],
            SyntheticMop::Concave { .. } => self
                .anchors()
                .iter()
                .map(|a| 1.0 - math::exp(-((x[0] - a[0]) * (x[0] - a[0]) + (x[1] - a[1]) * (x[1] - a[1]))))
                .collect(),
        }
    }

    /// Row `i` is `∇f_i(x)`.
    pub fn gradients(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match self {
            SyntheticMop::Convex => vec![vec![2.0 * x[0]], vec![2.0 * (x[0] - 1.0)]],
            SyntheticMop::Concave { .. } => self
                .anchors()
                .iter()
                .map(|a| {
                    let d = [x[0] - a[0], x[1] - a[1]];
                    let e = math::exp(-(d[0] * d[0] + d[1] * d[1]));
                    vec![2.0 * d[0] * e, 2.0 * d[1] * e]
                })
                .collect(),
        }
    }

    fn project(&self, x: &mut [f64]) {
        let (lo, hi) = self.bounds();
        for v in x {
            *v = v.clamp(lo, hi);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scalarizer {
    Linear,
    /// Subgradient on the worst weighted deviation.
    Tch,
    Stch {
        mu: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub objectives: Vec<f64>,
}

/// Projected gradient descent on the scalarised objective.
pub fn solve_scalarized(
    mop: &SyntheticMop,
    scalarizer: Scalarizer,
    w: &[f64],
    z: &[f64],
    x0: &[f64],
    steps: usize,
    lr: f64,
) -> Result<SolveOutcome> {
    if x0.len() != mop.dim() || w.len() != mop.objectives() || z.len() != mop.objectives() {
        return Err(Error::config("toy problem dimensions do not match"));
    }
    if let Scalarizer::Stch { mu } = scalarizer {
        if !(mu > 0.0) {
            return Err(Error::config(format!("smoothing mu must be positive, got {mu}")));
        }
    }
    let mut x = x0.to_vec();
    mop.project(&mut x);
    for step in 0..steps {
        let f = mop.evaluate(&x);
        let g = mop.gradients(&x);
        let coeffs: Vec<f64> = match scalarizer {
            Scalarizer::Linear => w.to_vec(),
            Scalarizer::Tch => {
                let dev: Vec<f64> = (0..f.len()).map(|i| w[i] * (f[i] - z[i])).collect();
                let j = crate::scalarize::argmax(&dev);
                (0..f.len()).map(|i| if i == j { w[i] } else { 0.0 }).collect()
            }
            Scalarizer::Stch { mu } => {
                let y: Vec<f64> = (0..f.len()).map(|i| w[i] * (f[i] - z[i]) / mu).collect();
                let soft = softmax(&y);
                (0..f.len()).map(|i| soft[i] * w[i]).collect()
            }
        };
        for (c, gi) in coeffs.iter().zip(&g) {
            math::axpy(-lr * c, gi, &mut x);
        }
        mop.project(&mut x);
        if !math::all_finite(&x) {
            return Err(Error::divergence(
                "toybench",
                format!("iterate became non-finite at step {step}"),
            ));
        }
    }
    let objectives = mop.evaluate(&x);
    Ok(SolveOutcome { x, objectives })
}

fn softmax(y: &[f64]) -> Vec<f64> {
    let m = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = y.iter().map(|v| math::exp(v - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Minimisation-form smooth Tchebycheff value.
pub fn stch_min(f: &[f64], w: &[f64], z: &[f64], mu: f64) -> f64 {
    let y: Vec<f64> = (0..f.len()).map(|i| w[i] * (f[i] - z[i]) / mu).collect();
    let m = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    mu * (m + math::ln(y.iter().map(|v| math::exp(v - m)).sum()))
}

pub fn tch_min(f: &[f64], w: &[f64], z: &[f64]) -> f64 {
    (0..f.len())
        .map(|i| w[i] * (f[i] - z[i]))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// A grid point and its objective vector.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
}

/// Non-dominated images of a uniform grid with `resolution` points per axis,
/// sorted by the first objective.
pub fn pareto_grid_oracle(mop: &SyntheticMop, resolution: usize) -> Vec<GridPoint> {
    let (lo, hi) = mop.bounds();
    let n = mop.dim();
    let step = if resolution > 1 {
        (hi - lo) / (resolution - 1) as f64
    } else {
        0.0
    };
    let total = resolution.pow(n as u32);
    let mut pts = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let x: Vec<f64> = idx.iter().map(|&k| lo + step * k as f64).collect();
        let f = mop.evaluate(&x);
        pts.push(GridPoint { x, f });
        for d in idx.iter_mut() {
            *d += 1;
            if *d < resolution {
                break;
            }
            *d = 0;
        }
    }
    minimal_front(pts)
}

/// Minimal elements of a two-objective set by a sorted sweep.
pub fn minimal_front(mut pts: Vec<GridPoint>) -> Vec<GridPoint> {
    pts.sort_by(|a, b| a.f[0].total_cmp(&b.f[0]).then(a.f[1].total_cmp(&b.f[1])));
    let mut front: Vec<GridPoint> = Vec::new();
    let mut best = f64::INFINITY;
    for p in pts {
        if p.f[1] < best {
            best = p.f[1];
            front.push(p);
        }
    }
    front
}

/// Front point minimising `score`.
pub fn front_argmin<F: Fn(&[f64]) -> f64>(front: &[GridPoint], score: F) -> Option<&GridPoint> {
    front.iter().min_by(|a, b| score(&a.f).total_cmp(&score(&b.f)))
}

/// The two extreme points of a front (best in each objective).
pub fn front_endpoints(front: &[GridPoint]) -> [Vec<f64>; 2] {
    [front[0].f.clone(), front[front.len() - 1].f.clone()]
}

pub fn objective_distance(a: &[f64], b: &[f64]) -> f64 {
    math::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Settings for repeated scalarised solves from random starts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryConfig {
    pub runs: usize,
    pub mu: f64,
    /// Every utopia coordinate; below the ideal point of the problem.
    pub utopia: f64,
    pub steps: usize,
    pub lr: f64,
    pub resolution: usize,
    /// Range of the first preference weight; `w_2 = 1 - w_1`.
    pub w_range: (f64, f64),
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            runs: 50,
            mu: 0.05,
            utopia: -0.05,
            steps: 5000,
            lr: 0.2,
            resolution: 601,
            w_range: (0.2, 0.8),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryRun {
    pub w: Vec<f64>,
    pub x0: Vec<f64>,
    pub scalarizer: Scalarizer,
    pub outcome: SolveOutcome,
    /// Objective-space distance to the nearer front endpoint.
    pub endpoint_distance: f64,
    /// Distance to the grid-front minimiser of the same scalarisation.
    pub oracle_distance: f64,
    /// Distance to the grid-front minimiser of hard Tchebycheff.
    pub balanced_distance: f64,
}

/// Solves every scalariser in `methods` from the same random `(w, x0)` draws
/// and scores each endpoint against the grid front.
pub fn recovery_study<R: Rng + ?Sized>(
    mop: &SyntheticMop,
    methods: &[Scalarizer],
    cfg: &RecoveryConfig,
    rng: &mut R,
) -> Result<Vec<RecoveryRun>> {
    let front = pareto_grid_oracle(mop, cfg.resolution);
    let ends = front_endpoints(&front);
    let z = vec![cfg.utopia; mop.objectives()];
    let (lo, hi) = mop.bounds();
    let mut out = Vec::with_capacity(cfg.runs * methods.len());
    for _ in 0..cfg.runs {
        let w1 = rng.random_range(cfg.w_range.0..=cfg.w_range.1);
        let w = vec![w1, 1.0 - w1];
        let x0: Vec<f64> = (0..mop.dim()).map(|_| rng.random_range(lo..=hi)).collect();
        let balanced = front_argmin(&front, |f| tch_min(f, &w, &z)).expect("front is never empty");
        for &s in methods {
            let outcome = solve_scalarized(mop, s, &w, &z, &x0, cfg.steps, cfg.lr)?;
            let oracle = match s {
                Scalarizer::Linear => front_argmin(&front, |f| f[0] * w[0] + f[1] * w[1]),
                Scalarizer::Tch => Some(balanced),
                Scalarizer::Stch { mu } => front_argmin(&front, |f| stch_min(f, &w, &z, mu)),
            }
            .expect("front is never empty");
            let f = &outcome.objectives;
            out.push(RecoveryRun {
                endpoint_distance: objective_distance(f, &ends[0]).min(objective_distance(f, &ends[1])),
                oracle_distance: objective_distance(f, &oracle.f),
                balanced_distance: objective_distance(f, &balanced.f),
                w: w.clone(),
                x0: x0.clone(),
                scalarizer: s,
                outcome,
            });
        }
    }
    Ok(out)
}
