//! Multi-objective environments.
//!
//! Every environment takes actions in `[0, 1]^d` and maps them affinely to its
//! native command ranges. Rewards are computed by pure functions of a
//! [`RewardInputs`] record, which is returned with every step so that a
//! logged trajectory can be re-scored without re-simulating it.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};

pub mod formation;
pub mod frogger;
pub mod patrol;
pub mod stealth;
pub mod stub;

pub use formation::{FormationConfig, FormationEnv, FormationInputs};
pub use frogger::{FroggerConfig, FroggerEnv, FroggerInputs};
pub use patrol::PatrolOpponent;
pub use stealth::{StealthConfig, StealthEnv, StealthInputs};
pub use stub::{StubConfig, StubEnv, StubInputs};

/// Result of one environment transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub reward: Vec<f64>,
    /// The episode reached a terminal state; the bootstrap value is zero.
    pub terminated: bool,
    /// The step cap was hit; the episode is cut but not terminal.
    pub truncated: bool,
    pub inputs: RewardInputs,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

pub trait Environment {
    fn name(&self) -> &'static str;
    fn objective_count(&self) -> usize;
    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<Step>;
    /// Nominal `(low, high)` range of an undiscounted episode return, used to
    /// place evaluation returns in the unit box.
    fn return_bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn objective_names(&self) -> Vec<&'static str>;
}

/// Everything a reward function reads, for one transition.
#[derive(Clone, Debug, PartialEq)]
pub enum RewardInputs {
    Stealth(StealthInputs),
    Frogger(FroggerInputs),
    Formation(FormationInputs),
    Stub(StubInputs),
}

impl RewardInputs {
    pub fn rewards(&self) -> Vec<f64> {
        match self {
            RewardInputs::Stealth(i) => stealth::rewards(i).to_vec(),
            RewardInputs::Frogger(i) => frogger::rewards(i).to_vec(),
            RewardInputs::Formation(i) => formation::rewards(i).to_vec(),
            RewardInputs::Stub(i) => stub::rewards(i),
        }
    }

    pub fn kind(&self) -> EnvKind {
        match self {
            RewardInputs::Stealth(_) => EnvKind::Stealth,
            RewardInputs::Frogger(_) => EnvKind::Frogger,
            RewardInputs::Formation(_) => EnvKind::Formation,
            RewardInputs::Stub(_) => EnvKind::Stub,
        }
    }

    /// Flat encoding used by the trajectory log.
    pub fn encode(&self) -> Vec<f64> {
        match self {
            RewardInputs::Stealth(i) => i.encode(),
            RewardInputs::Frogger(i) => i.encode(),
            RewardInputs::Formation(i) => i.encode(),
            RewardInputs::Stub(i) => i.encode(),
        }
    }

    pub fn decode(kind: EnvKind, data: &[f64]) -> Result<Self> {
        Ok(match kind {
            EnvKind::Stealth => RewardInputs::Stealth(StealthInputs::decode(data)?),
            EnvKind::Frogger => RewardInputs::Frogger(FroggerInputs::decode(data)?),
            EnvKind::Formation => RewardInputs::Formation(FormationInputs::decode(data)?),
            EnvKind::Stub => RewardInputs::Stub(StubInputs::decode(data)?),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EnvKind {
    Stealth,
    Frogger,
    Formation,
    Stub,
}

impl EnvKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::Stealth => "stealth",
            EnvKind::Frogger => "frogger",
            EnvKind::Formation => "formation",
            EnvKind::Stub => "stub",
        }
    }
}

impl core::str::FromStr for EnvKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stealth" => Ok(EnvKind::Stealth),
            "frogger" => Ok(EnvKind::Frogger),
            "formation" => Ok(EnvKind::Formation),
            "stub" => Ok(EnvKind::Stub),
            other => Err(Error::config(format!(
                "unknown environment '{other}' (expected stealth, frogger, formation or stub)"
            ))),
        }
    }
}

impl core::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parameters for every environment; only the selected one is used.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EnvConfig {
    pub name: EnvKind,
    pub stealth: StealthConfig,
    pub frogger: FroggerConfig,
    pub formation: FormationConfig,
    pub stub: StubConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            name: EnvKind::Stealth,
            stealth: StealthConfig::default(),
            frogger: FroggerConfig::default(),
            formation: FormationConfig::default(),
            stub: StubConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn with_kind(name: EnvKind) -> Self {
        EnvConfig {
            name,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.name {
            EnvKind::Stealth => self.stealth.validate(),
            EnvKind::Frogger => self.frogger.validate(),
            EnvKind::Formation => self.formation.validate(),
            EnvKind::Stub => self.stub.validate(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Environment + Send>> {
        self.validate()?;
        Ok(match self.name {
            EnvKind::Stealth => Box::new(StealthEnv::new(self.stealth.clone())),
            EnvKind::Frogger => Box::new(FroggerEnv::new(self.frogger.clone())),
            EnvKind::Formation => Box::new(FormationEnv::new(self.formation.clone())),
            EnvKind::Stub => Box::new(StubEnv::new(self.stub.clone())),
        })
    }
}

pub(crate) fn uniform(rng: &mut dyn RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub(crate) fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.clamp(lo, hi)
}

pub(crate) fn check_action(env: &str, action: &[f64], dim: usize) -> Result<()> {
    if action.len() != dim {
        return Err(Error::config(format!(
            "{env} expects {dim} action components, got {}",
            action.len()
        )));
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::divergence(env, "non-finite action"));
    }
    Ok(())
}

pub(crate) fn take<const N: usize>(what: &str, data: &[f64]) -> Result<[f64; N]> {
    data.try_into()
        .map_err(|_| Error::config(format!("{what} record needs {N} values, got {}", data.len())))
}

pub(crate) fn flag(x: f64) -> bool {
    x != 0.0
}

pub(crate) fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}
