//! The synthetic-front benchmark behind the `toybench` command.

use pasta_core::toybench::{recovery_study, RecoveryConfig, RecoveryRun, Scalarizer, SyntheticMop};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::table::fixed;

pub fn run(cfg: &RecoveryConfig, seed: u64) -> Result<Vec<RecoveryRun>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let methods = [Scalarizer::Linear, Scalarizer::Tch, Scalarizer::Stch { mu: cfg.mu }];
    Ok(recovery_study(&SyntheticMop::concave(), &methods, cfg, &mut rng)?)
}

fn label(s: Scalarizer) -> String {
    match s {
        Scalarizer::Linear => "linear".into(),
        Scalarizer::Tch => "tch".into(),
        Scalarizer::Stch { mu } => format!("stch_{mu}"),
    }
}

/// One row per solve: `w_0, w_1, method, run, x_0, x_1, f_0, f_1` plus the
/// distances to the front endpoints and to the method's own grid optimum.
pub fn to_csv(runs: &[RecoveryRun], methods: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::config(format!("csv: {e}"));
    w.write_record([
        "w_0",
        "w_1",
        "method",
        "run",
        "x_0",
        "x_1",
        "f_0",
        "f_1",
        "endpoint_distance",
        "oracle_distance",
    ])
    .map_err(err)?;
    for (k, r) in runs.iter().enumerate() {
        w.write_record([
            fixed(r.w[0]),
            fixed(r.w[1]),
            label(r.scalarizer),
            (k / methods).to_string(),
            fixed(r.outcome.x[0]),
            fixed(r.outcome.x[1]),
            fixed(r.outcome.objectives[0]),
            fixed(r.outcome.objectives[1]),
            fixed(r.endpoint_distance),
            fixed(r.oracle_distance),
        ])
        .map_err(err)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::config(e.to_string()))?).expect("utf-8"))
}
