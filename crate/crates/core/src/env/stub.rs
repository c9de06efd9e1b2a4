//! Small deterministic task used by tests and smoke runs.
//!
//! The observation is a phase signal. Objective `i` rewards actions close to
//! its own target corner, so the objectives conflict whenever `m > 1`.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use super::{check_action, Environment, RewardInputs, Step};
use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct StubConfig {
    pub objectives: usize,
    pub action_dim: usize,
    pub episode_length: usize,
}

impl Default for StubConfig {
    fn default() -> Self {
        StubConfig {
            objectives: 2,
            action_dim: 2,
            episode_length: 16,
        }
    }
}

impl StubConfig {
    pub fn validate(&self) -> Result<()> {
        if self.objectives == 0 || self.action_dim == 0 || self.episode_length == 0 {
            return Err(Error::config(
                "stub objectives, action dim and episode length must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StubInputs {
    /// Squared distance from the action to each objective's target.
    pub sq_dists: Vec<f64>,
}

impl StubInputs {
    pub fn encode(&self) -> Vec<f64> {
        self.sq_dists.clone()
    }

    pub fn decode(data: &[f64]) -> Result<Self> {
        Ok(StubInputs {
            sq_dists: data.to_vec(),
        })
    }
}

pub fn rewards(i: &StubInputs) -> Vec<f64> {
    i.sq_dists.iter().map(|d| 1.0 - d).collect()
}

/// Target of objective `i`: alternating corners of the unit cube.
pub fn target(i: usize, m: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|k| {
            if m == 1 {
                0.75
            } else if (i + k) % 2 == 0 {
                0.9
            } else {
                0.1
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct StubEnv {
    pub config: StubConfig,
    t: usize,
}

impl StubEnv {
    pub fn new(config: StubConfig) -> Self {
        StubEnv { config, t: 0 }
    }

    fn observation(&self) -> Vec<f64> {
        let phase = math::TAU * self.t as f64 / self.config.episode_length as f64;
        vec![
            math::sin(phase),
            math::cos(phase),
            self.t as f64 / self.config.episode_length as f64,
        ]
    }
}

impl Environment for StubEnv {
    fn name(&self) -> &'static str {
        "stub"
    }

    fn objective_count(&self) -> usize {
        self.config.objectives
    }

    fn observation_dim(&self) -> usize {
        3
    }

    fn action_dim(&self) -> usize {
        self.config.action_dim
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.t = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64], _rng: &mut dyn RngCore) -> Result<Step> {
        let c = &self.config;
        check_action("stub", action, c.action_dim)?;
        let sq_dists = (0..c.objectives)
            .map(|i| {
                let t = target(i, c.objectives, c.action_dim);
                action
                    .iter()
                    .zip(&t)
                    .map(|(a, b)| {
                        let d = a.clamp(0.0, 1.0) - b;
                        d * d
                    })
                    .sum::<f64>()
                    / c.action_dim as f64
            })
            .collect();
        let inputs = StubInputs { sq_dists };
        self.t += 1;
        let truncated = self.t >= c.episode_length;
        Ok(Step {
            observation: self.observation(),
            reward: rewards(&inputs),
            terminated: false,
            truncated,
            inputs: RewardInputs::Stub(inputs),
        })
    }

    fn return_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let l = self.config.episode_length as f64;
        (vec![0.0; self.config.objectives], vec![l; self.config.objectives])
    }

    fn objective_names(&self) -> Vec<&'static str> {
        vec!["target"; self.config.objectives]
    }
}
