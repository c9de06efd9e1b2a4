//! Parameter sweeps over a base configuration.

use std::path::Path;

use pasta_core::scalarize::benchmark_preferences;
use rayon::prelude::*;

use crate::config::{set_path, RunConfig};
use crate::error::{Error, Result};
use crate::manifest::RunManifest;
use crate::run;

#[derive(Clone, Debug, PartialEq)]
pub enum AxisKind {
    MuFixed,
    Rho,
    Tau,
    LambdaEma,
    Zeta,
    Preference,
    Seed,
}

impl AxisKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "mu_fixed" => AxisKind::MuFixed,
            "rho" => AxisKind::Rho,
            "tau" => AxisKind::Tau,
            "lambda_ema" => AxisKind::LambdaEma,
            "zeta" => AxisKind::Zeta,
            "preference" => AxisKind::Preference,
            "seed" => AxisKind::Seed,
            other => {
                return Err(Error::config(format!(
                    "unknown sweep axis '{other}' (expected mu_fixed, rho, tau, lambda_ema, zeta, preference or seed)"
                )))
            }
        })
    }

    fn name(&self) -> &'static str {
        match self {
            AxisKind::MuFixed => "mu_fixed",
            AxisKind::Rho => "rho",
            AxisKind::Tau => "tau",
            AxisKind::LambdaEma => "lambda_ema",
            AxisKind::Zeta => "zeta",
            AxisKind::Preference => "preference",
            AxisKind::Seed => "seed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AxisValue {
    Number(f64),
    Seed(u64),
    Preference(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub kind: AxisKind,
    pub values: Vec<AxisValue>,
}

impl Axis {
    /// Parses `name=values`. Numbers are comma separated; seeds also accept
    /// `a..b` (inclusive); preferences are `;`-separated comma lists or the
    /// word `benchmark` for the eight standard trade-offs.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, raw) = spec
            .split_once('=')
            .ok_or_else(|| Error::config(format!("axis '{spec}' is not of the form name=values")))?;
        let kind = AxisKind::parse(name.trim())?;
        let raw = raw.trim();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("axis {name}: '{s}' is not a number")))
        };
        let values: Vec<AxisValue> = match kind {
            AxisKind::Seed => {
                if let Some((a, b)) = raw.split_once("..") {
                    let a: u64 = a
                        .trim()
                        .parse()
                        .map_err(|_| Error::config(format!("bad seed range '{raw}'")))?;
                    let b: u64 = b
                        .trim()
                        .parse()
                        .map_err(|_| Error::config(format!("bad seed range '{raw}'")))?;
                    (a..=b).map(AxisValue::Seed).collect()
                } else {
                    raw.split(',')
                        .map(|s| {
                            s.trim()
                                .parse()
                                .map(AxisValue::Seed)
                                .map_err(|_| Error::config(format!("bad seed '{s}'")))
                        })
                        .collect::<Result<_>>()?
                }
            }
            AxisKind::Preference if raw == "benchmark" => benchmark_preferences()
                .into_iter()
                .map(|p| AxisValue::Preference(p.to_vec()))
                .collect(),
            AxisKind::Preference => raw
                .split(';')
                .map(|p| {
                    p.split(',')
                        .map(num)
                        .collect::<Result<Vec<f64>>>()
                        .map(AxisValue::Preference)
                })
                .collect::<Result<_>>()?,
            _ => raw
                .split(',')
                .map(|s| num(s).map(AxisValue::Number))
                .collect::<Result<_>>()?,
        };
        if values.is_empty() {
            return Err(Error::config(format!("axis {name} has no values")));
        }
        Ok(Axis { kind, values })
    }
}

fn apply(table: &mut toml::Table, kind: &AxisKind, v: &AxisValue) -> Result<String> {
    let f = |x: f64| toml::Value::Float(x);
    Ok(match (kind, v) {
        (AxisKind::MuFixed, AxisValue::Number(x)) => {
            set_path(table, "algorithm.name", toml::Value::String("fixed_stch".into()))?;
            set_path(table, "algorithm.fixed_mu", f(*x))?;
            format!("mu_fixed-{x}")
        }
        (AxisKind::Rho, AxisValue::Number(x)) => {
            set_path(table, "controller.rho", f(*x))?;
            format!("rho-{x}")
        }
        (AxisKind::Tau, AxisValue::Number(x)) => {
            set_path(table, "controller.tau", f(*x))?;
            format!("tau-{x}")
        }
        (AxisKind::LambdaEma, AxisValue::Number(x)) => {
            set_path(table, "controller.lambda_ema", f(*x))?;
            format!("lambda_ema-{x}")
        }
        (AxisKind::Zeta, AxisValue::Number(x)) => {
            set_path(table, "controller.zeta", f(*x))?;
            format!("zeta-{x}")
        }
        (AxisKind::Seed, AxisValue::Seed(s)) => {
            set_path(table, "algorithm.seed", toml::Value::Integer(*s as i64))?;
            format!("seed-{s}")
        }
        (AxisKind::Preference, AxisValue::Preference(p)) => {
            set_path(
                table,
                "algorithm.preference",
                toml::Value::Array(p.iter().map(|x| f(*x)).collect()),
            )?;
            format!(
                "pref-{}",
                p.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("_")
            )
        }
        _ => return Err(Error::config(format!("value {v:?} does not fit axis {}", kind.name()))),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SweepMode {
    /// Every combination of axis values.
    #[default]
    Cartesian,
    /// Each axis varied on its own, the others at the base configuration.
    SingleAxis,
}

/// Expands a sweep into one configuration per run, each with its own output
/// directory under `out`.
pub fn expand(base: &toml::Table, axes: &[Axis], mode: SweepMode, out: &Path) -> Result<Vec<RunConfig>> {
    let mut combos: Vec<Vec<(usize, usize)>> = Vec::new();
    match mode {
        SweepMode::Cartesian => {
            combos.push(Vec::new());
            for (a, axis) in axes.iter().enumerate() {
                combos = combos
                    .into_iter()
                    .flat_map(|c| {
                        (0..axis.values.len()).map(move |v| {
                            let mut c = c.clone();
                            c.push((a, v));
                            c
                        })
                    })
                    .collect();
            }
        }
        SweepMode::SingleAxis => {
            for (a, axis) in axes.iter().enumerate() {
                combos.extend((0..axis.values.len()).map(|v| vec![(a, v)]));
            }
        }
    }
    let mut configs = Vec::with_capacity(combos.len());
    for combo in combos {
        let mut t = base.clone();
        let mut tags = Vec::new();
        for (a, v) in combo {
            tags.push(apply(&mut t, &axes[a].kind, &axes[a].values[v])?);
        }
        let name = if tags.is_empty() {
            "base".to_string()
        } else {
            tags.join("__")
        };
        set_path(
            &mut t,
            "output.dir",
            toml::Value::String(out.join(name).to_string_lossy().into_owned()),
        )?;
        configs.push(RunConfig::from_table(t)?);
    }
    Ok(configs)
}

/// Trains every configuration on a worker pool. With `dry_run` only the
/// manifests are written.
pub fn execute(configs: &[RunConfig], dry_run: bool, jobs: Option<usize>) -> Result<Vec<RunManifest>> {
    let work = || -> Result<Vec<RunManifest>> {
        configs
            .par_iter()
            .map(|c| {
                if dry_run {
                    run::plan(c)
                } else {
                    run::train(c).map(|o| o.manifest)
                }
            })
            .collect()
    };
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::config(format!("worker pool: {e}")))?
            .install(work),
        None => work(),
    }
}
