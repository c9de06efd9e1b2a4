//! Training and evaluation of a single configured run.

use std::path::{Path, PathBuf};

use pasta_core::trainer::{EvalReport, IterationReport, Trainer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{write, Error, Result};
use crate::manifest::{RunManifest, CHECKPOINT_DIR, FINAL_CHECKPOINT, MANIFEST_FILE, METRICS_FILE, TRAJECTORY_FILE};
use crate::table::{MetricsRow, MetricsTable};
use crate::trajectory;

pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub initial_eval: EvalReport,
    pub reports: Vec<IterationReport>,
    pub table: MetricsTable,
}

impl RunOutcome {
    pub fn final_eval(&self) -> Option<&EvalReport> {
        self.reports.iter().rev().find_map(|r| r.eval.as_ref())
    }
}

pub fn build_trainer(config: &RunConfig) -> Result<Trainer> {
    Ok(Trainer::from_env_config(config.train_config(), &config.environment)?)
}

/// Writes the manifest only; used by sweep dry runs.
pub fn plan(config: &RunConfig) -> Result<RunManifest> {
    let tr = build_trainer(config)?;
    let manifest = RunManifest::new(config, tr.preference().to_vec());
    manifest.save(&Path::new(&config.output.dir).join(MANIFEST_FILE))?;
    Ok(manifest)
}

pub fn train(config: &RunConfig) -> Result<RunOutcome> {
    train_with(config, |_| {})
}

/// Trains a configured run, calling `progress` after every iteration.
pub fn train_with<F: FnMut(&IterationReport)>(config: &RunConfig, mut progress: F) -> Result<RunOutcome> {
    let dir = PathBuf::from(&config.output.dir);
    let mut tr = build_trainer(config)?;
    let manifest = RunManifest::new(config, tr.preference().to_vec());
    manifest.save(&dir.join(MANIFEST_FILE))?;

    let m = tr.objectives();
    let mut table = MetricsTable::new(m, MANIFEST_FILE);
    let initial_eval = tr.evaluate()?;
    table.push(MetricsRow::initial(&tr, &initial_eval));
    let mut reports = Vec::new();
    let every = config.output.checkpoint_every;
    while !tr.is_finished() {
        let report = tr.step()?;
        table.push(MetricsRow::from_report(&report, tr.mu()));
        progress(&report);
        if every > 0 && tr.iteration() % every == 0 {
            let p = dir
                .join(CHECKPOINT_DIR)
                .join(format!("iter_{:06}.ckpt", tr.iteration()));
            Checkpoint::capture(&tr, MANIFEST_FILE).save(&p)?;
        }
        reports.push(report);
    }
    Checkpoint::capture(&tr, MANIFEST_FILE).save(&dir.join(CHECKPOINT_DIR).join(FINAL_CHECKPOINT))?;
    write(&dir.join(METRICS_FILE), table.to_csv()?)?;

    if config.output.trajectory_log {
        let log = record_policy(&tr, config, config.output.eval_episodes)?;
        log.save(&dir.join(TRAJECTORY_FILE))?;
    }
    Ok(RunOutcome {
        dir,
        manifest,
        initial_eval,
        reports,
        table,
    })
}

/// Mean-action episodes of the trainer's current policy.
pub fn record_policy(tr: &Trainer, config: &RunConfig, episodes: usize) -> Result<trajectory::Trajectory> {
    let mut env = config.environment.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.algorithm.seed);
    rng.set_stream(6);
    let w = tr.preference().to_vec();
    trajectory::record(
        env.as_mut(),
        config.environment.name,
        episodes,
        &mut rng,
        Some(MANIFEST_FILE.into()),
        |obs| tr.actor.mean_action(obs, &w),
    )
}

/// Re-evaluates a finished run from one of its checkpoints.
pub fn evaluate(
    run_dir: &Path,
    checkpoint: Option<&Path>,
    episodes: Option<usize>,
) -> Result<(RunManifest, EvalReport)> {
    let manifest = RunManifest::load_dir(run_dir)?;
    let mut config = manifest.config.clone();
    if let Some(n) = episodes {
        config.output.eval_episodes = n;
    }
    let mut tr = build_trainer(&config)?;
    let path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| run_dir.join(CHECKPOINT_DIR).join(FINAL_CHECKPOINT));
    if !path.exists() {
        return Err(Error::config(format!("checkpoint {} does not exist", path.display())));
    }
    Checkpoint::load(&path)?.apply(&mut tr)?;
    let report = tr.evaluate()?;
    Ok((manifest, report))
}
