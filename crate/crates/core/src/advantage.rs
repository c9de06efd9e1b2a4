//! Per-objective generalised advantage estimation.
//!
//! All `T x m` quantities are stored row-major: entry `(t, i)` lives at
//! `t * m + i`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Result};
use crate::math;

/// On-policy experience for one iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBatch {
    pub objectives: usize,
    pub states: Vec<Vec<f64>>,
    /// Actions sent to the environment, clamped to `[0, 1]^d`.
    pub actions: Vec<Vec<f64>>,
    /// Gaussian samples before clamping; log-probabilities refer to these.
    pub raw_actions: Vec<Vec<f64>>,
    pub old_log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    /// Episode boundary after step `t` (termination or truncation).
    pub dones: Vec<bool>,
    pub values: Vec<f64>,
    /// `V(s_{t+1})`; zero when step `t` terminated the episode.
    pub next_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
    /// Undiscounted per-objective returns of episodes completed in this batch.
    pub episodic_returns: Vec<Vec<f64>>,
}

/// One recorded transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub raw_action: Vec<f64>,
    pub log_prob: f64,
    pub reward: Vec<f64>,
    pub done: bool,
    pub value: Vec<f64>,
    pub next_value: Vec<f64>,
}

impl RolloutBatch {
    pub fn new(objectives: usize) -> Self {
        RolloutBatch {
            objectives,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn push(&mut self, tr: Transition) -> Result<()> {
        let m = self.objectives;
        check_len("reward vector", tr.reward.len(), m)?;
        check_len("value vector", tr.value.len(), m)?;
        check_len("bootstrap value vector", tr.next_value.len(), m)?;
        self.states.push(tr.state);
        self.actions.push(tr.action);
        self.raw_actions.push(tr.raw_action);
        self.old_log_probs.push(tr.log_prob);
        self.rewards.extend_from_slice(&tr.reward);
        self.dones.push(tr.done);
        self.values.extend_from_slice(&tr.value);
        self.next_values.extend_from_slice(&tr.next_value);
        Ok(())
    }

    pub fn advantage_row(&self, t: usize) -> &[f64] {
        &self.advantages[t * self.objectives..(t + 1) * self.objectives]
    }

    pub fn target_row(&self, t: usize) -> &[f64] {
        &self.value_targets[t * self.objectives..(t + 1) * self.objectives]
    }

    /// Fills `advantages` and `value_targets` per objective.
    pub fn compute_gae(&mut self, gamma: f64, lambda_gae: f64) -> Result<()> {
        let (adv, targets) = compute_gae(
            &self.rewards,
            &self.values,
            &self.next_values,
            &self.dones,
            self.objectives,
            gamma,
            lambda_gae,
        )?;
        self.advantages = adv;
        self.value_targets = targets;
        Ok(())
    }

    pub fn normalize_advantages(&mut self) {
        normalize_columns(&mut self.advantages, self.objectives);
    }
}

/// Backward GAE recursion, run independently for each objective.
///
/// `delta_t = r_t + gamma * V(s_{t+1}) - V(s_t)` with `V(s_{t+1})` taken from
/// `next_values` (zero at terminals, the critic's estimate at truncations),
/// and `A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    dones: &[bool],
    m: usize,
    gamma: f64,
    lambda_gae: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let t_len = dones.len();
    check_len("rewards", rewards.len(), t_len * m)?;
    check_len("values", values.len(), t_len * m)?;
    check_len("next values", next_values.len(), t_len * m)?;
    let mut adv = vec![0.0; t_len * m];
    let mut targets = vec![0.0; t_len * m];
    for i in 0..m {
        let mut running = 0.0;
        for t in (0..t_len).rev() {
            let k = t * m + i;
            let cont = if dones[t] { 0.0 } else { 1.0 };
            let delta = rewards[k] + gamma * next_values[k] - values[k];
            running = delta + gamma * lambda_gae * cont * running;
            adv[k] = running;
            targets[k] = running + values[k];
        }
    }
    Ok((adv, targets))
}

/// Standardises every column with its population mean and standard deviation.
pub fn normalize_columns(data: &mut [f64], m: usize) {
    if m == 0 || data.is_empty() {
        return;
    }
    let n = data.len() / m;
    for i in 0..m {
        let mean = (0..n).map(|t| data[t * m + i]).sum::<f64>() / n as f64;
        let var = (0..n)
            .map(|t| (data[t * m + i] - mean) * (data[t * m + i] - mean))
            .sum::<f64>()
            / n as f64;
        let denom = math::sqrt(var) + 1e-8;
        for t in 0..n {
            data[t * m + i] = (data[t * m + i] - mean) / denom;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_terminal_step() {
        let (a, y) = compute_gae(&[2.0], &[0.5], &[0.0], &[true], 1, 0.99, 0.95).unwrap();
        assert_eq!(a, vec![1.5]);
        assert_eq!(y, vec![2.0]);
    }

    #[test]
    fn monte_carlo_identity_without_discount() {
        let r = [1.0, -2.0, 0.5, 3.0];
        let v = [0.1, 0.4, -0.3, 0.2];
        let bootstrap = 0.7;
        let nv = [v[1], v[2], v[3], bootstrap];
        let (a, _) = compute_gae(&r, &v, &nv, &[false; 4], 1, 1.0, 1.0).unwrap();
        for t in 0..4 {
            let tail: f64 = r[t..].iter().sum();
            assert!((a[t] - (tail - v[t] + bootstrap)).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_moments() {
        let mut d = vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 6.0, 5.0];
        normalize_columns(&mut d, 2);
        for i in 0..2 {
            let col: Vec<f64> = (0..4).map(|t| d[t * 2 + i]).collect();
            let mean = col.iter().sum::<f64>() / 4.0;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-9);
            assert!((var.sqrt() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_column_becomes_zero() {
        let mut d = vec![4.0, 1.0, 4.0, 2.0, 4.0, 3.0];
        normalize_columns(&mut d, 2);
        assert!((0..3).all(|t| d[t * 2] == 0.0));
    }

    #[test]
    fn column_isolation_under_scaling() {
        let base = vec![1.0, 3.0, -2.0, 0.5, 0.3, 8.0];
        let mut a = base.clone();
        let mut b = base.clone();
        for t in 0..3 {
            b[t * 2 + 1] *= 17.0;
        }
        normalize_columns(&mut a, 2);
        normalize_columns(&mut b, 2);
        for t in 0..3 {
            assert_eq!(a[t * 2], b[t * 2]);
        }
    }

    #[test]
    fn push_checks_objective_count() {
        let mut b = RolloutBatch::new(2);
        let tr = Transition {
            state: vec![0.0],
            action: vec![0.5],
            raw_action: vec![0.5],
            log_prob: 0.0,
            reward: vec![1.0],
            done: false,
            value: vec![0.0, 0.0],
            next_value: vec![0.0, 0.0],
        };
        assert!(b.push(tr).is_err());
    }
}
