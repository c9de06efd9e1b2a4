//! Return normalisation and the linear, Tchebycheff and smooth Tchebycheff
//! scalarisers, all in maximisation form over normalised returns.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::math;

const SIMPLEX_TOL: f64 = 1e-9;

/// Trade-off weights on the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceVector(Vec<f64>);

impl PreferenceVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::config("preference vector is empty"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::config(format!(
                "preference {weights:?} is not on the simplex: weights must be finite and non-negative"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::config(format!(
                "preference {weights:?} is not on the simplex: weights sum to {sum}, expected 1"
            )));
        }
        Ok(PreferenceVector(weights))
    }

    pub fn uniform(m: usize) -> Self {
        PreferenceVector(vec![1.0 / m as f64; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl core::ops::Deref for PreferenceVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// The eight trade-offs used for the stealth search benchmark.
pub fn benchmark_preferences() -> Vec<PreferenceVector> {
    let third = 1.0 / 3.0;
    [
        [0.1, 0.7, 0.2],
        [0.2, 0.2, 0.6],
        [0.2, 0.6, 0.2],
        [third, third, third],
        [0.4, 0.4, 0.2],
        [0.5, 0.3, 0.2],
        [0.6, 0.3, 0.1],
        [0.8, 0.1, 0.1],
    ]
    .iter()
    .map(|w| PreferenceVector(w.to_vec()))
    .collect()
}

/// Running per-objective extrema used to map raw returns into `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnNormalizer {
    pub running_min: Vec<f64>,
    pub running_max: Vec<f64>,
    pub epsilon: f64,
    initialized: bool,
}

impl ReturnNormalizer {
    pub fn new(m: usize) -> Self {
        ReturnNormalizer {
            running_min: vec![0.0; m],
            running_max: vec![0.0; m],
            epsilon: 1e-8,
            initialized: false,
        }
    }

    /// Rebuilds a normaliser from saved extrema.
    pub fn restore(running_min: Vec<f64>, running_max: Vec<f64>) -> Result<Self> {
        check_len("normaliser extrema", running_max.len(), running_min.len())?;
        Ok(ReturnNormalizer {
            running_min,
            running_max,
            epsilon: 1e-8,
            initialized: true,
        })
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    /// Absorbs the batch extrema and returns the normalised batch mean.
    pub fn update_and_normalize(&mut self, batch_returns: &[Vec<f64>]) -> Result<Vec<f64>> {
        let m = self.running_min.len();
        if batch_returns.is_empty() {
            return Err(Error::config("cannot normalise an empty batch of returns"));
        }
        let mut mean = vec![0.0; m];
        for r in batch_returns {
            check_len("episode return", r.len(), m)?;
            for i in 0..m {
                mean[i] += r[i];
                if !self.initialized {
                    self.running_min[i] = r[i];
                    self.running_max[i] = r[i];
                } else {
                    self.running_min[i] = self.running_min[i].min(r[i]);
                    self.running_max[i] = self.running_max[i].max(r[i]);
                }
            }
            self.initialized = true;
        }
        for v in &mut mean {
            *v /= batch_returns.len() as f64;
        }
        Ok(self.normalize(&mean))
    }

    pub fn normalize(&self, returns: &[f64]) -> Vec<f64> {
        returns
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let span = self.running_max[i] - self.running_min[i] + self.epsilon;
                ((r - self.running_min[i]) / span).clamp(0.0, 1.0)
            })
            .collect()
    }
}

/// Utopia point fixed at `zeta` in normalised-return space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UtopiaPoint {
    pub zeta: f64,
}

impl UtopiaPoint {
    pub fn new(zeta: f64) -> Result<Self> {
        if !(zeta > 1.0) || !zeta.is_finite() {
            return Err(Error::config(format!("utopia zeta must exceed 1, got {zeta}")));
        }
        Ok(UtopiaPoint { zeta })
    }

    pub fn realize(&self, m: usize) -> Vec<f64> {
        vec![self.zeta; m]
    }
}

impl Default for UtopiaPoint {
    fn default() -> Self {
        UtopiaPoint { zeta: 1.05 }
    }
}

/// `y_i = w_i (z*_i - r_i)`
pub fn weighted_deviations(r: &[f64], w: &[f64], z: &[f64]) -> Vec<f64> {
    r.iter().zip(w).zip(z).map(|((ri, wi), zi)| wi * (zi - ri)).collect()
}

pub fn linear_scalarize(r: &[f64], w: &[f64]) -> f64 {
    math::dot(r, w)
}

/// Index of the objective with the largest weighted deviation (lowest index on
/// ties) together with all deviations.
pub fn tch_worst_index(r: &[f64], w: &[f64], z: &[f64]) -> (usize, Vec<f64>) {
    let d = weighted_deviations(r, w, z);
    (argmax(&d), d)
}

/// Lowest-index argmax.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::config(format!("smoothness mu must be positive, got {mu}")));
    }
    Ok(())
}

/// `-mu * log sum_i exp(w_i (z*_i - r_i) / mu)`, evaluated with max subtraction.
pub fn stch_scalarize(r: &[f64], w: &[f64], z: &[f64], mu: f64) -> Result<f64> {
    check_mu(mu)?;
    let y = weighted_deviations(r, w, z);
    Ok(-log_sum_exp_scaled(&y, mu))
}

/// `mu * log sum exp(y / mu)`
fn log_sum_exp_scaled(y: &[f64], mu: f64) -> f64 {
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = y.iter().map(|yi| math::exp((yi - ymax) / mu)).sum();
    ymax + mu * math::ln(s)
}

/// Softmax attention over objectives; `dS/dr_i = w_i * delta_i`.
pub fn stch_attention(r: &[f64], w: &[f64], z: &[f64], mu: f64) -> Result<Vec<f64>> {
    check_mu(mu)?;
    let y = weighted_deviations(r, w, z);
    Ok(softmax_scaled(&y, mu))
}

fn softmax_scaled(y: &[f64], mu: f64) -> Vec<f64> {
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = y.iter().map(|yi| math::exp((yi - ymax) / mu)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `(1 - rho) * delta + rho * uniform`
pub fn maintenance_mix(delta: &[f64], rho: f64) -> Result<Vec<f64>> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::config(format!("maintenance rate must lie in (0, 1), got {rho}")));
    }
    let u = 1.0 / delta.len() as f64;
    Ok(delta.iter().map(|d| (1.0 - rho) * d + rho * u).collect())
}

/// Attention held fixed for one training iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights {
    pub delta: Vec<f64>,
    pub eta: Vec<f64>,
    pub mu_used: f64,
    pub rho: f64,
}

impl AttentionWeights {
    pub fn compute(r: &[f64], w: &[f64], z: &[f64], mu: f64, rho: f64) -> Result<Self> {
        let delta = stch_attention(r, w, z, mu)?;
        let eta = maintenance_mix(&delta, rho)?;
        Ok(AttentionWeights {
            delta,
            eta,
            mu_used: mu,
            rho,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const Z: [f64; 2] = [1.05, 1.05];

    #[test]
    fn preference_validation() {
        assert!(PreferenceVector::new(vec![0.5, 0.5]).is_ok());
        let err = PreferenceVector::new(vec![0.5, 0.6]).unwrap_err();
        assert!(format!("{err}").contains("simplex"));
        assert!(PreferenceVector::new(vec![1.2, -0.2]).is_err());
    }

    #[test]
    fn benchmark_preferences_sum_to_one() {
        let prefs = benchmark_preferences();
        assert_eq!(prefs.len(), 8);
        for p in prefs {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(PreferenceVector::new(p.to_vec()).is_ok());
        }
    }

    #[test]
    fn normalizer_midpoint() {
        let mut n = ReturnNormalizer::new(1);
        let r = n.update_and_normalize(&[vec![0.0], vec![10.0], vec![5.0]]).unwrap();
        assert!((r[0] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn normalizer_constant_objective_maps_to_zero() {
        let mut n = ReturnNormalizer::new(2);
        let r = n.update_and_normalize(&[vec![3.0, 1.0], vec![3.0, 2.0]]).unwrap();
        assert_eq!(r[0], 0.0);
    }

    #[test]
    fn normalizer_extrema_are_monotone() {
        let mut n = ReturnNormalizer::new(1);
        n.update_and_normalize(&[vec![4.0], vec![9.0]]).unwrap();
        n.update_and_normalize(&[vec![6.0], vec![7.0]]).unwrap();
        assert_eq!(n.running_max[0], 9.0);
        assert_eq!(n.running_min[0], 4.0);
        n.update_and_normalize(&[vec![-1.0]]).unwrap();
        assert_eq!(n.running_min[0], -1.0);
        assert!(n.update_and_normalize(&[]).is_err());
    }

    #[test]
    fn linear_examples() {
        assert_eq!(linear_scalarize(&[0.3, 0.9], &[1.0, 0.0]), 0.3);
        let u = [1.0 / 3.0; 3];
        assert!((linear_scalarize(&[0.4; 3], &u) - 0.4).abs() < 1e-15);
        let a = linear_scalarize(&[0.1, 0.5, 0.7], &[0.2, 0.3, 0.5]);
        let b = linear_scalarize(&[0.7, 0.1, 0.5], &[0.5, 0.2, 0.3]);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn tch_worst_index_examples() {
        let (j, d) = tch_worst_index(&[1.0, 0.0], &[0.5, 0.5], &Z);
        assert_eq!(j, 1);
        assert!((d[0] - 0.025).abs() < 1e-12 && (d[1] - 0.525).abs() < 1e-12);
        let (j, _) = tch_worst_index(&[0.4, 0.4, 0.4], &[1.0 / 3.0; 3], &[1.05; 3]);
        assert_eq!(j, 0);
        let (j1, _) = tch_worst_index(&[0.2, 0.9, 0.5], &[0.2, 0.5, 0.3], &[1.05; 3]);
        let (j2, _) = tch_worst_index(&[0.2, 0.9, 0.5], &[0.6, 1.5, 0.9], &[1.05; 3]);
        assert_eq!(j1, j2);
    }

    #[test]
    fn stch_symmetric_closed_form() {
        let s = stch_scalarize(&[1.0, 1.0], &[0.5, 0.5], &Z, 0.05).unwrap();
        let expected = -0.025 - 0.05 * core::f64::consts::LN_2;
        assert!((s - expected).abs() < 1e-12);
        assert!((s + 0.05966).abs() < 1e-5);
    }

    #[test]
    fn stch_single_objective_is_exact() {
        for mu in [1e-3, 0.5, 10.0] {
            let s = stch_scalarize(&[0.3], &[1.0], &[1.05], mu).unwrap();
            assert!((s + 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn stch_rejects_non_positive_mu() {
        assert!(stch_scalarize(&[0.3], &[1.0], &[1.05], 0.0).is_err());
        assert!(stch_attention(&[0.3], &[1.0], &[1.05], -1.0).is_err());
    }

    #[test]
    fn attention_examples() {
        let d = stch_attention(&[0.2, 0.2, 0.2], &[1.0 / 3.0; 3], &[1.05; 3], 0.1).unwrap();
        for v in d {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        // y = (0.025, 0.075) from w = 0.5, r = (1.0, 0.9).
        let d = stch_attention(&[1.0, 0.9], &[0.5, 0.5], &Z, 0.05).unwrap();
        let expected = 1.0 / (1.0 + libm::exp(-1.0));
        assert!((d[1] - expected).abs() < 1e-12);
        assert!((d[1] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn attention_near_uniform_for_large_mu() {
        let d = stch_attention(&[0.0, 1.0, 0.5], &[0.6, 0.3, 0.1], &[1.05; 3], 10.0).unwrap();
        for v in d {
            assert!((v - 1.0 / 3.0).abs() < 0.02);
        }
    }

    #[test]
    fn maintenance_mix_examples() {
        let eta = maintenance_mix(&[1.0, 0.0], 0.15).unwrap();
        assert!((eta[0] - 0.925).abs() < 1e-15 && (eta[1] - 0.075).abs() < 1e-15);
        let eta = maintenance_mix(&[1.0, 0.0, 0.0], 0.999).unwrap();
        assert!(eta.iter().all(|e| (e - 1.0 / 3.0).abs() < 1e-3));
        assert!(maintenance_mix(&[1.0], 1.0).is_err());
        assert!(maintenance_mix(&[1.0], 0.0).is_err());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0]), 0);
    }

    #[test]
    fn utopia_requires_zeta_above_one() {
        assert!(UtopiaPoint::new(1.0).is_err());
        assert_eq!(UtopiaPoint::new(1.05).unwrap().realize(3), vec![1.05; 3]);
    }
}
