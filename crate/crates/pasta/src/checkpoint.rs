//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `PASTACKP` |
//! | 4     | format version (`1`) |
//! | 4     | header length `h` |
//! | h     | UTF-8 JSON [`Header`] |
//! | rest  | the sections listed in the header, each a run of `f64` |
//!
//! Network vectors use the networks' flat layout: layer by layer, weights
//! row-major then biases, with the actor's `log_std` appended last.

use std::path::Path;

use pasta_core::nn::AdamState;
use pasta_core::scalarize::ReturnNormalizer;
use pasta_core::trainer::Trainer;
use serde::{Deserialize, Serialize};

use crate::error::{write, Error, Result};

pub const MAGIC: &[u8; 8] = b"PASTACKP";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub objectives: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    pub critic: String,
    pub preference: Vec<f64>,
    pub iteration: u64,
    pub kappa: f64,
    pub mu: f64,
    pub controller_t: u64,
    pub actor_adam_steps: u64,
    pub critic_adam_steps: u64,
    pub normalizer_initialized: bool,
    /// File name of the manifest of the run that wrote this checkpoint.
    pub manifest: String,
    pub sections: Vec<Section>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: Header,
    pub data: Vec<Vec<f64>>,
}

const SECTIONS: [&str; 8] = [
    "actor",
    "actor_m",
    "actor_v",
    "critic",
    "critic_m",
    "critic_v",
    "normalizer_min",
    "normalizer_max",
];

impl Checkpoint {
    pub fn capture(tr: &Trainer, manifest: &str) -> Self {
        let data = vec![
            tr.actor.flat(),
            tr.actor_opt.first_moment.clone(),
            tr.actor_opt.second_moment.clone(),
            tr.critic.flat(),
            tr.critic_opt.first_moment.clone(),
            tr.critic_opt.second_moment.clone(),
            tr.normalizer.running_min.clone(),
            tr.normalizer.running_max.clone(),
        ];
        let sections = SECTIONS
            .iter()
            .zip(&data)
            .map(|(n, d)| Section {
                name: n.to_string(),
                len: d.len(),
            })
            .collect();
        let header = Header {
            objectives: tr.objectives(),
            state_dim: tr.actor.state_dim,
            action_dim: tr.actor.action_dim(),
            critic: tr.critic.kind().to_string(),
            preference: tr.preference().to_vec(),
            iteration: tr.iteration(),
            kappa: tr.conflict_estimate(),
            mu: tr.controller.mu,
            controller_t: tr.controller.t,
            actor_adam_steps: tr.actor_opt.step_count,
            critic_adam_steps: tr.critic_opt.step_count,
            normalizer_initialized: tr.normalizer.is_initialized(),
            manifest: manifest.to_string(),
            sections,
        };
        Checkpoint { header, data }
    }

    pub fn section(&self, name: &str) -> Option<&[f64]> {
        self.header
            .sections
            .iter()
            .position(|s| s.name == name)
            .map(|i| self.data[i].as_slice())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serialises");
        let mut out = Vec::with_capacity(16 + header.len() + 8 * self.data.iter().map(Vec::len).sum::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for d in &self.data {
            for v in d {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |msg: &str| Error::format(path, format!("not a valid checkpoint: {msg}"));
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
        let mut off = 16 + hlen;
        let mut data = Vec::with_capacity(header.sections.len());
        for s in &header.sections {
            let end = off + 8 * s.len;
            let raw = bytes
                .get(off..end)
                .ok_or_else(|| bad(&format!("section {} is truncated", s.name)))?;
            data.push(
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            );
            off = end;
        }
        if off != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Checkpoint { header, data })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write(path, self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// Loads parameters, optimiser moments, controller and normaliser state
    /// into a trainer built from the same configuration.
    pub fn apply(&self, tr: &mut Trainer) -> Result<()> {
        let h = &self.header;
        if h.objectives != tr.objectives()
            || h.state_dim != tr.actor.state_dim
            || h.action_dim != tr.actor.action_dim()
            || h.critic != tr.critic.kind().to_string()
        {
            return Err(Error::config(format!(
                "checkpoint shape (m={}, state={}, action={}, critic={}) does not match the configured run",
                h.objectives, h.state_dim, h.action_dim, h.critic
            )));
        }
        if h.preference != tr.preference().as_slice() {
            return Err(Error::config(format!(
                "checkpoint was trained for preference {:?}, run is configured for {:?}",
                h.preference,
                tr.preference().as_slice()
            )));
        }
        let get = |n: &str| {
            self.section(n)
                .ok_or_else(|| Error::config(format!("checkpoint lacks section {n}")))
        };
        tr.actor.set_flat(get("actor")?)?;
        tr.critic.set_flat(get("critic")?)?;
        tr.actor_opt = restore_adam(&tr.actor_opt, get("actor_m")?, get("actor_v")?, h.actor_adam_steps)?;
        tr.critic_opt = restore_adam(&tr.critic_opt, get("critic_m")?, get("critic_v")?, h.critic_adam_steps)?;
        tr.controller.mu = h.mu;
        tr.controller.t = h.controller_t;
        if h.normalizer_initialized {
            tr.normalizer =
                ReturnNormalizer::restore(get("normalizer_min")?.to_vec(), get("normalizer_max")?.to_vec())?;
        }
        tr.restore_progress(h.iteration, h.kappa);
        Ok(())
    }
}

fn restore_adam(base: &AdamState, m: &[f64], v: &[f64], steps: u64) -> Result<AdamState> {
    if m.len() != base.first_moment.len() || v.len() != base.second_moment.len() {
        return Err(Error::config("optimiser moments do not match the parameter count"));
    }
    let mut s = base.clone();
    s.first_moment = m.to_vec();
    s.second_moment = v.to_vec();
    s.step_count = steps;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pasta_core::env::{EnvConfig, EnvKind};
    use pasta_core::trainer::{PpoConfig, TrainConfig};

    fn trainer(seed: u64) -> Trainer {
        let cfg = TrainConfig {
            ppo: PpoConfig {
                horizon: 32,
                epochs: 1,
                minibatch: 16,
                ..Default::default()
            },
            seed,
            total_iterations: 3,
            ..Default::default()
        };
        Trainer::from_env_config(cfg, &EnvConfig::with_kind(EnvKind::Stub)).unwrap()
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let mut tr = trainer(1);
        tr.run_iteration().unwrap();
        let ck = Checkpoint::capture(&tr, "manifest.json");
        let back = Checkpoint::from_bytes(&ck.to_bytes(), Path::new("x")).unwrap();
        assert_eq!(ck, back);
        for (a, b) in ck.data.iter().zip(&back.data) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn apply_restores_parameters() {
        let mut tr = trainer(1);
        tr.run_iteration().unwrap();
        let ck = Checkpoint::capture(&tr, "m");
        let mut fresh = trainer(2);
        ck.apply(&mut fresh).unwrap();
        assert_eq!(fresh.actor.flat(), tr.actor.flat());
        assert_eq!(fresh.critic.flat(), tr.critic.flat());
        assert_eq!(fresh.iteration(), 1);
        assert_eq!(fresh.controller.mu, tr.controller.mu);
        assert_eq!(fresh.normalizer, tr.normalizer);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let ck = Checkpoint::capture(&trainer(0), "m");
        let bytes = ck.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3], Path::new("x")).is_err());
        assert!(Checkpoint::from_bytes(b"NOTACKPT00000000", Path::new("x")).is_err());
    }
}
