use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pasta::compare;
use pasta::config::RunConfig;
use pasta::error::{write, Error, Result};
use pasta::manifest::RunManifest;
use pasta::run;
use pasta::sweep::{self, Axis, SweepMode};
use pasta::table::fixed;
use pasta::toy;
use pasta::trajectory;
use pasta_core::toybench::{RecoveryConfig, Scalarizer};

#[derive(Parser)]
#[command(
    name = "pasta",
    version,
    about = "Multi-objective PPO with adaptive smooth Tchebycheff scalarisation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configured run.
    Train {
        #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
        config: Option<PathBuf>,
        /// Re-run the configuration stored in a run manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// `section.key=value`, repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        quiet: bool,
    },
    /// Evaluate a checkpoint of a finished run.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Also record the evaluation episodes to this trajectory log.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Re-score a trajectory log and report any reward that does not match.
    Replay { log: PathBuf },
    /// Build comparison tables across runs.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// `benchmark` or `;`-separated comma lists.
        #[arg(long)]
        preferences: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a grid of runs derived from a base configuration.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `name=values`, repeatable; names: mu_fixed, rho, tau, lambda_ema, zeta, preference, seed.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        #[arg(long, value_enum, default_value_t = Mode::Cartesian)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Write manifests without training.
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Solve the concave-front synthetic problem with each scalariser.
    Toybench {
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 0.05)]
        mu: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Cartesian,
    Single,
}

fn load_config(config: Option<PathBuf>, manifest: Option<PathBuf>, overrides: &[String]) -> Result<RunConfig> {
    match (config, manifest) {
        (Some(p), _) => RunConfig::load(&p, overrides),
        (None, Some(m)) => {
            let base = RunManifest::load(&m)?.config;
            let mut table = base.to_table()?;
            for o in overrides {
                pasta::config::apply_override(&mut table, o)?;
            }
            RunConfig::from_table(table)
        }
        (None, None) => Err(Error::config("either --config or --manifest is required")),
    }
}

fn parse_preferences(spec: &str) -> Result<Vec<Vec<f64>>> {
    let axis = Axis::parse(&format!("preference={spec}"))?;
    Ok(axis
        .values
        .into_iter()
        .filter_map(|v| match v {
            sweep::AxisValue::Preference(p) => Some(p),
            _ => None,
        })
        .collect())
}

fn real_main(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            manifest,
            seed,
            out,
            mut overrides,
            quiet,
        } => {
            if let Some(s) = seed {
                overrides.push(format!("algorithm.seed={s}"));
            }
            if let Some(o) = out {
                overrides.push(format!(
                    "output.dir={}",
                    toml::Value::String(o.to_string_lossy().into_owned())
                ));
            }
            let cfg = load_config(config, manifest, &overrides)?;
            let outcome = run::train_with(&cfg, |r| {
                if !quiet {
                    let hv = r
                        .eval
                        .as_ref()
                        .map(|e| format!(" hv={}", fixed(e.hypervolume)))
                        .unwrap_or_default();
                    eprintln!("iter {:>5} kappa={:.4} mu={:.4}{hv}", r.iteration, r.kappa, r.mu);
                }
            })?;
            println!("{}", outcome.dir.display());
        }
        Command::Evaluate {
            run: dir,
            checkpoint,
            episodes,
            trajectory: log,
        } => {
            let (manifest, report) = run::evaluate(&dir, checkpoint.as_deref(), episodes)?;
            let json = serde_json::json!({
                "run": dir,
                "method": manifest.method,
                "preference": manifest.preference,
                "mean_returns": report.mean_returns,
                "normalized": report.normalized,
                "hypervolume": report.hypervolume,
                "expected_utility": report.expected_utility,
            });
            println!("{}", serde_json::to_string_pretty(&json).expect("json"));
            if let Some(path) = log {
                let mut cfg = manifest.config.clone();
                if let Some(n) = episodes {
                    cfg.output.eval_episodes = n;
                }
                let mut tr = run::build_trainer(&cfg)?;
                let ck = checkpoint.unwrap_or_else(|| {
                    dir.join(pasta::manifest::CHECKPOINT_DIR)
                        .join(pasta::manifest::FINAL_CHECKPOINT)
                });
                pasta::checkpoint::Checkpoint::load(&ck)?.apply(&mut tr)?;
                run::record_policy(&tr, &cfg, cfg.output.eval_episodes)?.save(&path)?;
            }
        }
        Command::Replay { log } => {
            let t = trajectory::Trajectory::load(&log)?;
            let rep = trajectory::replay(&t)?;
            println!("{} steps, {} mismatches", rep.steps, rep.mismatches.len());
            if let Some((k, a, b)) = rep.mismatches.first() {
                return Err(Error::format(
                    &log,
                    format!("step {k}: recorded {a:?}, recomputed {b:?}"),
                ));
            }
        }
        Command::Compare { runs, preferences, out } => {
            let dirs = compare::discover(&runs)?;
            let loaded = dirs.iter().map(|d| compare::load_run(d)).collect::<Result<Vec<_>>>()?;
            let prefs = preferences.as_deref().map(parse_preferences).transpose()?;
            let table = compare::compare(&loaded, prefs.as_deref())?;
            compare::write_tables(&table, &out)?;
            for w in &table.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", compare::summary_csv(&table)?);
        }
        Command::Sweep {
            config,
            axes,
            mode,
            out,
            overrides,
            dry_run,
            jobs,
        } => {
            let base = RunConfig::load(&config, &overrides)?.to_table()?;
            let axes = axes.iter().map(|a| Axis::parse(a)).collect::<Result<Vec<_>>>()?;
            let mode = match mode {
                Mode::Cartesian => SweepMode::Cartesian,
                Mode::Single => SweepMode::SingleAxis,
            };
            let configs = sweep::expand(&base, &axes, mode, &out)?;
            let manifests = sweep::execute(&configs, dry_run, jobs)?;
            for (c, m) in configs.iter().zip(&manifests) {
                println!("{}\t{}\tseed={}", c.output.dir, m.method, m.seed);
            }
        }
        Command::Toybench { runs, mu, seed, out } => {
            let cfg = RecoveryConfig {
                runs,
                mu,
                ..Default::default()
            };
            let results = toy::run(&cfg, seed)?;
            let csv = toy::to_csv(&results, 3)?;
            match out {
                Some(p) => write(&p, csv)?,
                None => print!("{csv}"),
            }
            for s in [Scalarizer::Linear, Scalarizer::Tch, Scalarizer::Stch { mu }] {
                let sel: Vec<_> = results.iter().filter(|r| r.scalarizer == s).collect();
                let ends = sel.iter().filter(|r| r.endpoint_distance < 1e-2).count();
                let own = sel.iter().filter(|r| r.oracle_distance < 1e-2).count();
                eprintln!(
                    "{s:?}: {ends}/{} at a front endpoint, {own}/{} at their grid optimum",
                    sel.len(),
                    sel.len()
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
