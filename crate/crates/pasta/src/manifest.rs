//! Per-run manifest: the full configuration snapshot plus provenance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{read_to_string, write, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const TRAJECTORY_FILE: &str = "trajectory.jsonl";

pub fn build_id() -> &'static str {
    env!("PASTA_BUILD_ID")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub metrics: String,
    pub checkpoints: String,
    pub trajectory: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub build_id: String,
    pub seed: u64,
    pub environment: String,
    pub algorithm: String,
    pub method: String,
    pub preference: Vec<f64>,
    pub config: RunConfig,
    pub outputs: Outputs,
}

impl RunManifest {
    pub fn new(config: &RunConfig, preference: Vec<f64>) -> Self {
        RunManifest {
            build_id: build_id().to_string(),
            seed: config.algorithm.seed,
            environment: config.environment.name.to_string(),
            algorithm: config.algorithm().label(),
            method: config.method_label(),
            preference,
            config: config.clone(),
            outputs: Outputs {
                metrics: METRICS_FILE.into(),
                checkpoints: CHECKPOINT_DIR.into(),
                trajectory: config.output.trajectory_log.then(|| TRAJECTORY_FILE.into()),
            },
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e.to_string()))?;
        write(path, text + "\n")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let m: RunManifest = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        m.config.validate()?;
        Ok(m)
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Err(Error::config(format!("{} contains no {MANIFEST_FILE}", dir.display())));
        }
        Self::load(&path)
    }
}
