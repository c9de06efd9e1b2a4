//! Run configuration: a sectioned TOML file plus `key=value` overrides.
//!
//! ```toml
//! [environment]
//! name = "frogger"
//!
//! [algorithm]
//! name = "pasta"
//! preference = [0.4, 0.4, 0.2]
//! seed = 1
//! total_iterations = 200
//!
//! [ppo]
//! horizon = 2048
//! ```
//!
//! Unknown keys anywhere in the file are rejected.

use std::path::Path;

use pasta_core::controller::ControllerMode;
use pasta_core::env::EnvConfig;
use pasta_core::trainer::{Ablation, Algorithm, PpoConfig, StchConfig, TchSelection, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    #[default]
    Pasta,
    Linear,
    Tch,
    FixedStch,
}

/// How PCGrad pairs are chosen. Only exhaustive enumeration is implemented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairSampling {
    #[default]
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgorithmSection {
    pub name: AlgorithmName,
    /// Smoothing used by `fixed_stch`.
    pub fixed_mu: f64,
    pub tch_selection: TchSelection,
    pub pair_sampling: PairSampling,
    /// Empty selects the uniform preference.
    pub preference: Vec<f64>,
    pub seed: u64,
    pub total_iterations: u64,
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        AlgorithmSection {
            name: AlgorithmName::Pasta,
            fixed_mu: 1.0,
            tch_selection: TchSelection::PerIteration,
            pair_sampling: PairSampling::All,
            preference: Vec::new(),
            seed: 0,
            total_iterations: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub dir: String,
    /// Checkpoint cadence in iterations; 0 keeps only the final checkpoint.
    pub checkpoint_every: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// Record the final evaluation episodes to `trajectory.jsonl`.
    pub trajectory_log: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "runs/default".into(),
            checkpoint_every: 0,
            eval_every: 10,
            eval_episodes: 8,
            trajectory_log: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub environment: EnvConfig,
    pub algorithm: AlgorithmSection,
    pub controller: StchConfig,
    pub ppo: PpoConfig,
    pub ablation: Ablation,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        if !path.exists() {
            return Err(Error::config(format!("config file {} does not exist", path.display())));
        }
        let text = read_to_string(path)?;
        Self::parse(&text, overrides).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::config(format!("invalid TOML: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let mut unknown = Vec::new();
        let cfg: RunConfig = serde_ignored::deserialize(toml::Value::Table(table), |p| unknown.push(p.to_string()))
            .map_err(|e| Error::config(e.to_string()))?;
        if !unknown.is_empty() {
            return Err(Error::config(format!("unknown keys: {}", unknown.join(", "))));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_table(&self) -> Result<toml::Table> {
        toml::Table::try_from(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Checks everything that can be checked without building the trainer.
    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        let env = self.environment.build()?;
        self.train_config().validate(env.objective_count())?;
        Ok(())
    }

    pub fn algorithm(&self) -> Algorithm {
        match self.algorithm.name {
            AlgorithmName::Pasta => Algorithm::Pasta,
            AlgorithmName::Linear => Algorithm::Linear,
            AlgorithmName::Tch => Algorithm::Tch,
            AlgorithmName::FixedStch => Algorithm::FixedStch {
                mu: self.algorithm.fixed_mu,
            },
        }
    }

    /// Method label used to group runs in comparisons.
    pub fn method_label(&self) -> String {
        let mut label = self.algorithm().label();
        let a = &self.ablation;
        if a.no_pcgrad {
            label.push_str("+no_pcgrad");
        }
        if a.weighted_pcgrad {
            label.push_str("+weighted_pcgrad");
        }
        if a.critic != Default::default() {
            label.push_str(&format!("+{}", serde_label(&a.critic)));
        }
        if a.controller != ControllerMode::Full {
            label.push_str(&format!("+{}", serde_label(&a.controller)));
        }
        label
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            algorithm: self.algorithm(),
            ppo: self.ppo,
            stch: self.controller,
            ablation: self.ablation,
            tch_selection: self.algorithm.tch_selection,
            total_iterations: self.algorithm.total_iterations,
            seed: self.algorithm.seed,
            preference: self.algorithm.preference.clone(),
            eval_every: self.output.eval_every,
            eval_episodes: self.output.eval_episodes,
        }
    }
}

fn serde_label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::from("?"),
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
pub fn parse_value(raw: &str) -> toml::Value {
    let raw = raw.trim();
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Applies `section.key=value` to a parsed config table.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override '{spec}' is not of the form key=value")))?;
    set_path(table, key.trim(), parse_value(value))
}

pub fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("malformed key '{key}'")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("'{p}' in '{key}' is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pasta_core::env::EnvKind;

    #[test]
    fn defaults_match_the_reference_setup() {
        let c = RunConfig::parse("", &[]).unwrap();
        assert_eq!(c.ppo.horizon, 2048);
        assert_eq!(c.ppo.minibatch, 64);
        assert_eq!(c.controller.rho, 0.15);
        assert_eq!(c.controller.zeta, 1.05);
        assert_eq!(c.environment.name, EnvKind::Stealth);
    }

    #[test]
    fn sections_and_overrides() {
        let text = "[environment]\nname = \"frogger\"\n[ppo]\nhorizon = 128\n";
        let c = RunConfig::parse(text, &["ppo.epochs=3".into(), "algorithm.name=linear".into()]).unwrap();
        assert_eq!(c.environment.name, EnvKind::Frogger);
        assert_eq!(c.ppo.horizon, 128);
        assert_eq!(c.ppo.epochs, 3);
        assert_eq!(c.algorithm.name, AlgorithmName::Linear);
    }

    #[test]
    fn unknown_keys_are_listed() {
        let err = RunConfig::parse("[ppo]\nhorizn = 3\n[algorithm]\nsed = 1\n", &[]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ppo.horizn") && msg.contains("algorithm.sed"), "{msg}");
        assert_eq!(err.exit_code(), 2);
        assert!(RunConfig::parse("", &["ppo.nope=1".into()]).is_err());
    }

    #[test]
    fn preference_must_be_on_the_simplex() {
        let text = "[environment]\nname = \"stub\"\n[algorithm]\npreference = [0.5, 0.6]\n";
        let err = RunConfig::parse(text, &[]).unwrap_err();
        assert!(err.to_string().contains("simplex"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::parse("[algorithm]\nname = \"fixed_stch\"\nfixed_mu = 0.5\n", &[]).unwrap();
        let back = RunConfig::parse(&c.to_toml().unwrap(), &[]).unwrap();
        assert_eq!(c, back);
        assert_eq!(back.method_label(), "stch_0.5");
    }
}
