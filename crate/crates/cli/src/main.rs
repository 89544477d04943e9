//! `rabi-sweep`: parameter sweeps, single points, convergence audits and
//! decay fits for the driven-dissipative Rabi model.
//!
//! Exit codes: 0 success, 1 nothing computed, 2 some points failed (or were
//! flagged by `validate`), 3 configuration or usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rabi_floquet::sweep::{self, output, Axis, ConfigError, Format, ScenarioConfig};

const EXIT_FAILURE: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "rabi-sweep", version, about = "Floquet-Liouville sweeps of the driven-dissipative Rabi model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Output format (overrides `output.format`).
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for random initial states.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every grid point of the scenario.
    Sweep { config: PathBuf },
    /// Evaluate the scenario at a single coupling strength.
    Point {
        config: PathBuf,
        #[arg(long)]
        g: f64,
    },
    /// Rerun each grid point at doubled truncations and report the drift.
    Validate { config: PathBuf },
    /// Fit the exponential approach of I_out to its steady value and compare with Ω₁.
    FitDecay {
        config: PathBuf,
        #[arg(long)]
        g: f64,
    },
}

enum Failure {
    Config(ConfigError),
    Other(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn load(path: &Path, common: &Common) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(dir) = &common.out_dir {
        cfg.output.dir = dir.clone();
    }
    if let Some(f) = common.format {
        cfg.output.format = f;
    }
    Ok(cfg)
}

fn single_point(mut cfg: ScenarioConfig, g: f64) -> Result<ScenarioConfig, ConfigError> {
    cfg.sweep = sweep::config::SweepAxis::single(Axis::G, g);
    cfg.validate()?;
    Ok(cfg)
}

fn status(ok: usize, failed: usize) -> u8 {
    match (ok, failed) {
        (_, 0) => 0,
        (0, _) => EXIT_FAILURE,
        _ => EXIT_PARTIAL,
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let c = &cli.common;
    match &cli.command {
        Command::Sweep { config } => {
            let cfg = load(config, c)?;
            let report = sweep::run_sweep(&cfg, c.workers, c.seed)?;
            for path in output::write_report(&report, &cfg.output.dir, cfg.output.format)? {
                println!("wrote {}", path.display());
            }
            for e in report.failures() {
                eprintln!("{e}");
            }
            Ok(status(report.successes().count(), report.failures().count()))
        }
        Command::Point { config, g } => {
            let cfg = single_point(load(config, c)?, *g)?;
            let report = sweep::run_sweep(&cfg, Some(1), c.seed)?;
            output::write_report(&report, &cfg.output.dir, cfg.output.format)?;
            match &report.outcomes[0] {
                Ok(p) => {
                    println!("{}", serde_json::to_string_pretty(p).map_err(|e| Failure::Other(e.to_string()))?);
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("{e}");
                    Ok(EXIT_FAILURE)
                }
            }
        }
        Command::Validate { config } => {
            let cfg = load(config, c)?;
            let report = sweep::run_sweep(&cfg, c.workers, c.seed)?;
            let audits = sweep::validate_sweep(&cfg, &report, c.workers);
            let path = output::write_convergence(&audits, cfg.sweep.axis.name(), &report.config_hash, &cfg.output.dir, cfg.output.format)?;
            println!("wrote {}", path.display());
            for a in &audits {
                let verdict = if a.flagged { "FLAGGED" } else { "ok" };
                match &a.error {
                    Some(e) => println!("{} = {}: {verdict} (rerun failed: {e})", cfg.sweep.axis, a.value),
                    None => println!("{} = {}: {verdict}, max drift {:.3e}", cfg.sweep.axis, a.value, a.max_drift),
                }
            }
            for e in report.failures() {
                eprintln!("{e}");
            }
            let flagged = audits.iter().filter(|a| a.flagged).count();
            Ok(status(report.successes().count(), report.failures().count() + flagged))
        }
        Command::FitDecay { config, g } => {
            let cfg = single_point(load(config, c)?, *g)?;
            match sweep::fit_decay(&cfg, *g) {
                Ok(fit) => {
                    println!(
                        "g = {g}: fitted rate {:.6e} γ over τγ ∈ [{:.4e}, {:.4e}]; |Re Ω₁| = {:.6e} γ; relative difference {:.3e}",
                        fit.fitted_rate,
                        fit.fit.window.0 * cfg.base.gamma,
                        fit.fit.window.1 * cfg.base.gamma,
                        fit.omega_1[0].abs(),
                        fit.relative_error,
                    );
                    if let Some(r) = fit.slowest_real {
                        println!("slowest real mode: {r:.6e} γ");
                    }
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("{e}");
                    Ok(EXIT_FAILURE)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    // usage errors count as configuration errors; clap's own code 2 would
    // read as a partial failure
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.common.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
