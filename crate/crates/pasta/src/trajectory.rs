//! JSON-lines trajectory log.
//!
//! The first line is a [`LogHeader`]; every following line is one
//! [`StepRecord`]. The reward-input record is stored in its flat encoding, so
//! a log can be re-scored with the environment's reward functions alone.
//! `serde_json` writes the shortest round-tripping decimal for every `f64`,
//! so replayed rewards compare bit for bit.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use pasta_core::env::{EnvKind, Environment, RewardInputs};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub environment: EnvKind,
    pub objectives: usize,
    pub manifest: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: usize,
    pub t: usize,
    pub action: Vec<f64>,
    pub reward: Vec<f64>,
    pub inputs: Vec<f64>,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub header: LogHeader,
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn new(environment: EnvKind, objectives: usize, manifest: Option<String>) -> Self {
        Trajectory {
            header: LogHeader {
                environment,
                objectives,
                manifest,
            },
            steps: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        let io = |e: std::io::Error| Error::io(path, e);
        serde_json::to_writer(&mut w, &self.header).map_err(|e| Error::format(path, e.to_string()))?;
        w.write_all(b"\n").map_err(io)?;
        for s in &self.steps {
            serde_json::to_writer(&mut w, s).map_err(|e| Error::format(path, e.to_string()))?;
            w.write_all(b"\n").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(f).lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::format(path, "empty trajectory log"))?
            .map_err(|e| Error::io(path, e))?;
        let header: LogHeader =
            serde_json::from_str(&first).map_err(|e| Error::format(path, format!("header: {e}")))?;
        let mut steps = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: StepRecord =
                serde_json::from_str(&line).map_err(|e| Error::format(path, format!("line {}: {e}", k + 2)))?;
            steps.push(rec);
        }
        Ok(Trajectory { header, steps })
    }
}

/// Runs `episodes` episodes with `policy` and records every step.
pub fn record<F>(
    env: &mut dyn Environment,
    kind: EnvKind,
    episodes: usize,
    rng: &mut dyn RngCore,
    manifest: Option<String>,
    mut policy: F,
) -> Result<Trajectory>
where
    F: FnMut(&[f64]) -> pasta_core::Result<Vec<f64>>,
{
    let mut log = Trajectory::new(kind, env.objective_count(), manifest);
    for episode in 0..episodes {
        let mut obs = env.reset(rng);
        let mut t = 0;
        loop {
            let action = policy(&obs)?;
            let step = env.step(&action, rng)?;
            let done = step.done();
            log.steps.push(StepRecord {
                episode,
                t,
                action,
                reward: step.reward,
                inputs: step.inputs.encode(),
                done,
            });
            if done {
                break;
            }
            obs = step.observation;
            t += 1;
        }
    }
    Ok(log)
}

/// Outcome of re-scoring a log.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayReport {
    pub steps: usize,
    /// `(line index, recorded, recomputed)` for every step that differs.
    pub mismatches: Vec<(usize, Vec<f64>, Vec<f64>)>,
}

impl ReplayReport {
    pub fn is_exact(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Recomputes every reward vector from its logged inputs and compares bits.
pub fn replay(log: &Trajectory) -> Result<ReplayReport> {
    let mut mismatches = Vec::new();
    for (k, s) in log.steps.iter().enumerate() {
        let inputs = RewardInputs::decode(log.header.environment, &s.inputs)?;
        let r = inputs.rewards();
        let same = r.len() == s.reward.len() && r.iter().zip(&s.reward).all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            mismatches.push((k, s.reward.clone(), r));
        }
    }
    Ok(ReplayReport {
        steps: log.steps.len(),
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use pasta_core::env::EnvConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn detects_tampering() {
        let mut env = EnvConfig::with_kind(EnvKind::Frogger).build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut prng = ChaCha8Rng::seed_from_u64(5);
        let mut log = record(env.as_mut(), EnvKind::Frogger, 2, &mut rng, None, |_| {
            Ok(vec![prng.random::<f64>(), prng.random::<f64>()])
        })
        .unwrap();
        assert!(replay(&log).unwrap().is_exact());
        log.steps[3].reward[0] += 1e-15;
        assert_eq!(replay(&log).unwrap().mismatches.len(), 1);
    }
}
