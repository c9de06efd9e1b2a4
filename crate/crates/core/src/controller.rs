//! Closed-loop control of the smoothing parameter `mu`.
//!
//! Three stages run once per training iteration: a linear base decay from
//! `mu_start` to `mu_min`, a brake that pulls the target toward `mu_max` when
//! the measured conflict ratio exceeds the threshold `tau`, and an EMA with
//! factor `lambda_ema` applied to the result.

use alloc::format;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ControllerMode {
    #[default]
    Full,
    /// Braking disabled: `beta` is always 0.
    NoConflict,
    /// Base schedule pinned at `mu_start`.
    NoDecay,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerConfig {
    pub mu_start: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub tau: f64,
    pub lambda_ema: f64,
    /// Total number of controller steps (training iterations).
    pub horizon: u64,
    pub mode: ControllerMode,
}

impl ControllerConfig {
    pub fn with_horizon(horizon: u64) -> Self {
        ControllerConfig {
            mu_start: 10.0,
            mu_min: 0.05,
            mu_max: 10.0,
            tau: 0.4,
            lambda_ema: 0.05,
            horizon,
            mode: ControllerMode::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.mu_min && self.mu_min <= self.mu_start && self.mu_start <= self.mu_max) {
            return Err(Error::config(format!(
                "controller requires 0 < mu_min <= mu_start <= mu_max, got {} / {} / {}",
                self.mu_min, self.mu_start, self.mu_max
            )));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::config(format!(
                "conflict threshold tau must lie in (0, 1), got {}",
                self.tau
            )));
        }
        if !(self.lambda_ema > 0.0 && self.lambda_ema <= 1.0) {
            return Err(Error::config(format!(
                "EMA factor must lie in (0, 1], got {}",
                self.lambda_ema
            )));
        }
        if self.horizon == 0 {
            return Err(Error::config("controller horizon must be positive"));
        }
        Ok(())
    }

    /// Linear schedule `mu_start - (mu_start - mu_min) * min(1, t / T)`.
    pub fn base_decay(&self, t: u64) -> f64 {
        if self.mode == ControllerMode::NoDecay {
            return self.mu_start;
        }
        base_decay(self.mu_start, self.mu_min, t, self.horizon)
    }
}

pub fn base_decay(mu_start: f64, mu_min: f64, t: u64, horizon: u64) -> f64 {
    let frac = (t as f64 / horizon as f64).min(1.0);
    mu_start - (mu_start - mu_min) * frac
}

/// Boost proportional to the conflict in excess of `tau`, in `[0, 1]`.
pub fn braking_boost(kappa: f64, tau: f64) -> f64 {
    if kappa > tau {
        ((kappa - tau) / (1.0 - tau)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn target_mu(mu_base: f64, beta: f64, mu_max: f64) -> f64 {
    mu_base + beta * (mu_max - mu_base)
}

/// One row of the controller trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerTrace {
    pub t: u64,
    pub kappa: f64,
    pub mu_base: f64,
    pub beta: f64,
    pub mu_star: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerState {
    pub config: ControllerConfig,
    pub mu: f64,
    pub t: u64,
}

impl ControllerState {
    pub fn new(config: ControllerConfig) -> Result<Self> {
        config.validate()?;
        Ok(ControllerState {
            mu: config.mu_start,
            t: 0,
            config,
        })
    }

    /// Advances one iteration using the last measured conflict ratio.
    pub fn step(&mut self, kappa: f64) -> ControllerTrace {
        let kappa = kappa.clamp(0.0, 1.0);
        self.t += 1;
        let c = &self.config;
        let mu_base = c.base_decay(self.t);
        let beta = match c.mode {
            ControllerMode::NoConflict => 0.0,
            _ => braking_boost(kappa, c.tau),
        };
        let mu_star = target_mu(mu_base, beta, c.mu_max);
        self.mu = (1.0 - c.lambda_ema) * self.mu + c.lambda_ema * mu_star;
        ControllerTrace {
            t: self.t,
            kappa,
            mu_base,
            beta,
            mu_star,
            mu: self.mu,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn base_decay_endpoints() {
        let c = ControllerConfig::with_horizon(100);
        assert_eq!(c.base_decay(0), 10.0);
        assert!((c.base_decay(100) - 0.05).abs() < 1e-15);
        assert!((c.base_decay(200) - 0.05).abs() < 1e-15);
        let nd = ControllerConfig {
            mode: ControllerMode::NoDecay,
            ..c
        };
        assert_eq!(nd.base_decay(70), 10.0);
    }

    #[test]
    fn zero_horizon_is_rejected() {
        assert!(ControllerState::new(ControllerConfig::with_horizon(0)).is_err());
    }

    #[test]
    fn braking_examples() {
        assert_eq!(braking_boost(0.4, 0.4), 0.0);
        assert_eq!(braking_boost(1.0, 0.4), 1.0);
        assert!((braking_boost(0.7, 0.4) - 0.5).abs() < 1e-15);
        assert_eq!(braking_boost(0.1, 0.4), 0.0);
    }

    #[test]
    fn target_examples() {
        assert_eq!(target_mu(0.3, 0.0, 10.0), 0.3);
        assert_eq!(target_mu(0.3, 1.0, 10.0), 10.0);
        assert!((target_mu(0.05, 0.5, 10.0) - 5.025).abs() < 1e-12);
    }

    #[test]
    fn ema_arithmetic() {
        // mu_prev = 10 and a target of mu_min at t >= T.
        let mut s = ControllerState::new(ControllerConfig::with_horizon(1)).unwrap();
        let tr = s.step(0.0);
        assert!((tr.mu_star - 0.05).abs() < 1e-12);
        assert!((tr.mu - 9.5025).abs() < 1e-12);
    }

    #[test]
    fn unit_lambda_traces_base_decay() {
        let cfg = ControllerConfig {
            lambda_ema: 1.0,
            ..ControllerConfig::with_horizon(50)
        };
        let mut s = ControllerState::new(cfg).unwrap();
        for t in 1..=80u64 {
            let tr = s.step(0.0);
            assert_eq!(tr.mu, cfg.base_decay(t));
        }
    }

    #[test]
    fn no_conflict_mode_ignores_kappa() {
        let cfg = ControllerConfig {
            mode: ControllerMode::NoConflict,
            ..ControllerConfig::with_horizon(50)
        };
        let mut a = ControllerState::new(cfg).unwrap();
        let mut b = ControllerState::new(cfg).unwrap();
        for _ in 0..30 {
            assert_eq!(a.step(1.0).mu, b.step(0.0).mu);
        }
    }

    #[test]
    fn mu_stays_bounded() {
        let cfg = ControllerConfig::with_horizon(40);
        let mut s = ControllerState::new(cfg).unwrap();
        let trace: Vec<f64> = (0..200).map(|k| ((k * 37) % 11) as f64 / 10.0).collect();
        for k in trace {
            let tr = s.step(k);
            assert!(tr.mu >= cfg.mu_min - 1e-12 && tr.mu <= cfg.mu_max + 1e-12);
        }
    }
}
