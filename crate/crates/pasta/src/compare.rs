//! Cross-run comparison tables.
//!
//! Each run contributes the evaluation return vector of its best checkpoint
//! (highest hypervolume under the environment's nominal bounds). All runs are
//! then placed in a common unit box whose bounds are the extremes over every
//! evaluation row of every run in the comparison.

use std::path::{Path, PathBuf};

use pasta_core::metrics::{ComparisonTable, NormalizationBounds, RunPoint};

use crate::error::{write, Error, Result};
use crate::manifest::{RunManifest, METRICS_FILE};
use crate::table::{fixed, read_evaluations, EvalRow};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const PER_PREFERENCE_FILE: &str = "per_preference.csv";

#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub evaluations: Vec<EvalRow>,
}

impl LoadedRun {
    pub fn best(&self) -> &EvalRow {
        let mut best = &self.evaluations[0];
        for r in &self.evaluations[1..] {
            if r.hv > best.hv {
                best = r;
            }
        }
        best
    }
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    if !dir.is_dir() {
        return Err(Error::config(format!("run directory {} does not exist", dir.display())));
    }
    let manifest = RunManifest::load_dir(dir)?;
    let metrics = dir.join(METRICS_FILE);
    if !metrics.exists() {
        return Err(Error::config(format!("{} contains no {METRICS_FILE}", dir.display())));
    }
    let evaluations = read_evaluations(&metrics)?;
    if evaluations.is_empty() {
        return Err(Error::config(format!("{} has no evaluation rows", metrics.display())));
    }
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        manifest,
        evaluations,
    })
}

/// Expands directories that hold run subdirectories rather than a manifest.
pub fn discover(dirs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for d in dirs {
        if !d.is_dir() {
            return Err(Error::config(format!("run directory {} does not exist", d.display())));
        }
        if d.join(crate::manifest::MANIFEST_FILE).exists() {
            out.push(d.clone());
            continue;
        }
        let mut found = Vec::new();
        collect_runs(d, &mut found)?;
        if found.is_empty() {
            return Err(Error::config(format!("{} contains no runs", d.display())));
        }
        found.sort();
        out.extend(found);
    }
    Ok(out)
}

fn collect_runs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for e in entries {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            if p.join(crate::manifest::MANIFEST_FILE).exists() {
                out.push(p);
            } else {
                collect_runs(&p, out)?;
            }
        }
    }
    Ok(())
}

/// Keys of two JSON values that differ, as dotted paths.
pub fn json_diff(a: &serde_json::Value, b: &serde_json::Value, prefix: &str, out: &mut Vec<String>) {
    use serde_json::Value;
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let mut keys: Vec<&String> = x.keys().chain(y.keys()).collect();
            keys.sort();
            keys.dedup();
            for k in keys {
                let p = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                match (x.get(k), y.get(k)) {
                    (Some(u), Some(v)) => json_diff(u, v, &p, out),
                    (u, v) => out.push(format!("{p}: {} vs {}", show(u), show(v))),
                }
            }
        }
        _ if a != b => out.push(format!("{prefix}: {a} vs {b}")),
        _ => {}
    }
}

fn show(v: Option<&serde_json::Value>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "<absent>".into())
}

/// Refuses runs that do not share environment and evaluation protocol.
pub fn check_compatible(runs: &[LoadedRun]) -> Result<()> {
    let key = |r: &LoadedRun| {
        serde_json::json!({
            "environment": r.manifest.config.environment,
            "eval_episodes": r.manifest.config.output.eval_episodes,
            "eval_every": r.manifest.config.output.eval_every,
        })
    };
    let first = key(&runs[0]);
    for r in &runs[1..] {
        let mut diff = Vec::new();
        json_diff(&first, &key(r), "", &mut diff);
        if !diff.is_empty() {
            return Err(Error::config(format!(
                "runs {} and {} are not comparable:\n  {}",
                runs[0].dir.display(),
                r.dir.display(),
                diff.join("\n  ")
            )));
        }
    }
    Ok(())
}

fn same(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9)
}

/// Builds the comparison over `runs`, optionally restricted to `preferences`.
pub fn compare(runs: &[LoadedRun], preferences: Option<&[Vec<f64>]>) -> Result<ComparisonTable> {
    if runs.is_empty() {
        return Err(Error::config("no runs to compare"));
    }
    check_compatible(runs)?;
    let selected: Vec<&LoadedRun> = match preferences {
        Some(set) => {
            for p in set {
                if !runs.iter().any(|r| same(&r.manifest.preference, p)) {
                    return Err(Error::config(format!("no run uses preference {p:?}")));
                }
            }
            runs.iter()
                .filter(|r| set.iter().any(|p| same(&r.manifest.preference, p)))
                .collect()
        }
        None => runs.iter().collect(),
    };
    let bounds = NormalizationBounds::from_points(
        selected
            .iter()
            .flat_map(|r| r.evaluations.iter().map(|e| e.returns.as_slice())),
    )?;
    let points: Vec<RunPoint> = selected
        .iter()
        .map(|r| RunPoint {
            method: r.manifest.method.clone(),
            preference: r.manifest.preference.clone(),
            seed: r.manifest.seed,
            returns: r.best().returns.clone(),
        })
        .collect();
    Ok(ComparisonTable::build(&points, Some(bounds))?)
}

fn pref_label(p: &[f64]) -> String {
    p.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(";")
}

/// Summary: one row per method.
pub fn summary_csv(t: &ComparisonTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::config(format!("csv: {e}"));
    w.write_record([
        "method",
        "hypervolume_mean",
        "hypervolume_std",
        "win_rate",
        "objective_dominance_rate",
        "dmp_auc",
        "expected_utility",
    ])
    .map_err(err)?;
    for s in &t.summary {
        w.write_record([
            s.method.clone(),
            fixed(s.hv_mean),
            fixed(s.hv_std),
            fixed(s.win_rate),
            fixed(s.objective_dominance),
            fixed(s.dmp_auc),
            fixed(s.eu_mean),
        ])
        .map_err(err)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::config(e.to_string()))?).expect("utf-8"))
}

/// Breakdown with one row per (preference, method).
pub fn per_preference_csv(t: &ComparisonTable) -> Result<String> {
    let m = t.bounds.low.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::config(format!("csv: {e}"));
    let mut header: Vec<String> = [
        "preference",
        "method",
        "seeds",
        "hypervolume_mean",
        "hypervolume_std",
        "eu_mean",
        "eu_std",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..m).map(|i| format!("objective_{i}_mean")));
    w.write_record(&header).map_err(err)?;
    for pref in &t.preferences {
        for c in t.cells.iter().filter(|c| same(&c.preference, pref)) {
            let mut rec = vec![
                pref_label(pref),
                c.method.clone(),
                c.seeds.to_string(),
                fixed(c.hv_mean),
                fixed(c.hv_std),
                fixed(c.eu_mean),
                fixed(c.eu_std),
            ];
            rec.extend(c.objective_means.iter().map(|x| fixed(*x)));
            w.write_record(&rec).map_err(err)?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::config(e.to_string()))?).expect("utf-8"))
}

pub fn write_tables(t: &ComparisonTable, out: &Path) -> Result<()> {
    write(&out.join(SUMMARY_FILE), summary_csv(t)?)?;
    write(&out.join(PER_PREFERENCE_FILE), per_preference_csv(t)?)?;
    Ok(())
}
