//! The per-iteration metrics CSV.
//!
//! Every float is written with ten fixed decimals so that two identical runs
//! produce identical bytes. Columns that do not apply to a row are empty.
//! The first line is a `#` comment naming the run's manifest.

use std::path::Path;

use pasta_core::trainer::{EvalReport, IterationReport, Trainer};

use crate::error::{read_to_string, Error, Result};

pub fn fixed(x: f64) -> String {
    format!("{x:.10}")
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct MetricsRow {
    pub iteration: u64,
    pub kappa: f64,
    pub mu: Option<f64>,
    /// `(mu_base, beta, mu_star)` when the adaptive controller ran.
    pub controller: Option<(f64, f64, f64)>,
    pub delta: Vec<f64>,
    pub eta: Vec<f64>,
    pub train_returns: Vec<f64>,
    pub episodes: usize,
    pub value_loss: Option<f64>,
    pub entropy: f64,
    pub eval_returns: Option<Vec<f64>>,
    pub hv: Option<f64>,
    pub eu: Option<f64>,
}

impl MetricsRow {
    pub fn initial(tr: &Trainer, eval: &EvalReport) -> Self {
        let m = tr.objectives();
        let uniform = vec![1.0 / m as f64; m];
        MetricsRow {
            iteration: 0,
            kappa: 0.0,
            mu: Some(tr.mu()),
            controller: None,
            delta: uniform.clone(),
            eta: uniform,
            train_returns: vec![0.0; m],
            episodes: 0,
            value_loss: None,
            entropy: tr.actor.entropy(),
            eval_returns: Some(eval.mean_returns.clone()),
            hv: Some(eval.hypervolume),
            eu: Some(eval.expected_utility),
        }
    }

    pub fn from_report(r: &IterationReport, mu: f64) -> Self {
        MetricsRow {
            iteration: r.iteration,
            kappa: r.kappa,
            mu: Some(mu),
            controller: r.controller.map(|c| (c.mu_base, c.beta, c.mu_star)),
            delta: r.delta.clone(),
            eta: r.eta.clone(),
            train_returns: r.mean_episode_returns.clone(),
            episodes: r.episodes_completed,
            value_loss: Some(r.value_loss),
            entropy: r.entropy,
            eval_returns: r.eval.as_ref().map(|e| e.mean_returns.clone()),
            hv: r.eval.as_ref().map(|e| e.hypervolume),
            eu: r.eval.as_ref().map(|e| e.expected_utility),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsTable {
    pub objectives: usize,
    pub manifest: String,
    pub rows: Vec<MetricsRow>,
}

fn opt(x: Option<f64>) -> String {
    x.map(fixed).unwrap_or_default()
}

impl MetricsTable {
    pub fn new(objectives: usize, manifest: &str) -> Self {
        MetricsTable {
            objectives,
            manifest: manifest.into(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: MetricsRow) {
        self.rows.push(row);
    }

    pub fn header(&self) -> Vec<String> {
        let m = self.objectives;
        let mut h: Vec<String> = ["iteration", "kappa", "mu", "mu_base", "beta", "mu_star"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for p in ["delta", "eta", "train_return"] {
            h.extend((0..m).map(|i| format!("{p}_{i}")));
        }
        h.extend(["episodes", "value_loss", "entropy"].iter().map(|s| s.to_string()));
        h.extend((0..m).map(|i| format!("eval_return_{i}")));
        h.extend(["hv", "hv_so_far", "eu"].iter().map(|s| s.to_string()));
        h
    }

    pub fn to_csv(&self) -> Result<String> {
        let m = self.objectives;
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::config(format!("csv: {e}"));
        w.write_record(self.header()).map_err(err)?;
        let mut best: Option<f64> = None;
        for r in &self.rows {
            if let Some(hv) = r.hv {
                best = Some(best.map_or(hv, |b| b.max(hv)));
            }
            let mut rec = vec![r.iteration.to_string(), fixed(r.kappa), opt(r.mu)];
            match r.controller {
                Some((a, b, c)) => rec.extend([fixed(a), fixed(b), fixed(c)]),
                None => rec.extend([String::new(), String::new(), String::new()]),
            }
            rec.extend(r.delta.iter().map(|x| fixed(*x)));
            rec.extend(r.eta.iter().map(|x| fixed(*x)));
            rec.extend(r.train_returns.iter().map(|x| fixed(*x)));
            rec.push(r.episodes.to_string());
            rec.push(opt(r.value_loss));
            rec.push(fixed(r.entropy));
            match &r.eval_returns {
                Some(e) => rec.extend(e.iter().map(|x| fixed(*x))),
                None => rec.extend((0..m).map(|_| String::new())),
            }
            rec.push(opt(r.hv));
            rec.push(opt(best));
            rec.push(opt(r.eu));
            w.write_record(&rec).map_err(err)?;
        }
        let body =
            String::from_utf8(w.into_inner().map_err(|e| Error::config(e.to_string()))?).expect("csv output is UTF-8");
        Ok(format!("# manifest: {}\n{body}", self.manifest))
    }
}

/// One evaluation row read back from a metrics CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub iteration: u64,
    pub returns: Vec<f64>,
    pub hv: f64,
}

/// Reads every row of a metrics CSV that carries an evaluation.
pub fn read_evaluations(path: &Path) -> Result<Vec<EvalRow>> {
    let text = read_to_string(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let bad = |msg: String| Error::format(path, msg);
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let it_col = col("iteration").ok_or_else(|| bad("missing iteration column".into()))?;
    let hv_col = col("hv").ok_or_else(|| bad("missing hv column".into()))?;
    let ret_cols: Vec<usize> = (0..).map_while(|i| col(&format!("eval_return_{i}"))).collect();
    if ret_cols.is_empty() {
        return Err(bad("missing eval_return columns".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let hv = &rec[hv_col];
        if hv.is_empty() {
            continue;
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("bad number '{s}': {e}")));
        rows.push(EvalRow {
            iteration: rec[it_col].parse().map_err(|e| bad(format!("bad iteration: {e}")))?,
            returns: ret_cols.iter().map(|&c| num(&rec[c])).collect::<Result<_>>()?,
            hv: num(hv)?,
        });
    }
    Ok(rows)
}
