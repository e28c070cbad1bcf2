//! Command-line interface. `run` returns the process exit code so the binary
//! stays a one-liner and the commands can be driven from tests.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::chart::{analytic_series, render_svg, simulated_series};
use crate::config::{env_seed, load_config, ConfigError, ExperimentConfig};
use crate::experiment::{self, is_saturated, DEFAULT_RESOLUTION};
use crate::table::{self, SweepRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SATURATED: i32 = 3;

pub const SWEEP_FILE: &str = "sweep.csv";
pub const ANALYZE_FILE: &str = "analyze.csv";

#[derive(Debug, Parser)]
#[command(name = "halosim", version, about = "Load-split analysis and simulation for heterogeneous PS clusters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate proportional and optimal mean response times per arrival rate.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Also write analyze.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the closed form and the solver against a brute-force search.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: f64,
    },
    /// Simulate every (arrival rate, policy) cell and write sweep.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides HALOSIM_SEED and the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw <label>.svg, adding simulated points when sweep.csv is present.
    Chart {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the optimal split and regime at one arrival rate.
    Split {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lambda: f64,
    },
}

fn load(path: &Path, err: &mut dyn Write) -> Option<ExperimentConfig> {
    match load_config(path) {
        Ok(c) => Some(c),
        Err(e) => {
            let _ = writeln!(err, "config error: {e}");
            None
        }
    }
}

/// Seed precedence: command line, then environment, then config file.
fn resolve_seed(config: ExperimentConfig, flag: Option<u64>) -> Result<ExperimentConfig, ConfigError> {
    let seed = match flag {
        Some(s) => Some(s),
        None => env_seed()?,
    };
    Ok(match seed {
        Some(s) => config.with_seed(s),
        None => config,
    })
}

fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)
}

fn print_sweep_summary(rows: &[SweepRow], out: &mut dyn Write) {
    let _ = writeln!(
        out,
        "{:>10} {:<10} {:>12} {:>12} {:>12}  note",
        "lambda", "policy", "analytic_T", "simulated_T", "ci_half"
    );
    let num = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
    for r in rows {
        let _ = writeln!(
            out,
            "{:>10.4} {:<10} {:>12} {:>12} {:>12}  {}",
            r.lambda,
            r.policy,
            num(r.analytic_t),
            num(r.simulated_t),
            num(r.ci_halfwidth),
            r.error.as_deref().unwrap_or("")
        );
    }
}

/// Runs one parsed command, writing human output to `out` and diagnostics to `err`.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match cli.command {
        Command::Analyze { config, out: dir } => {
            let Some(config) = load(&config, err) else { return EXIT_CONFIG };
            let rows = match experiment::analyze(&config) {
                Ok(r) => r,
                Err(e) => {
                    let _ = writeln!(err, "analyze failed: {e}");
                    return EXIT_FAILURE;
                }
            };
            let text = table::analyze_to_string(&rows);
            let _ = out.write_all(text.as_bytes());
            if let Some(dir) = dir {
                if let Err(e) = write_file(&dir.join(ANALYZE_FILE), &text) {
                    let _ = writeln!(err, "cannot write {}: {e}", dir.display());
                    return EXIT_FAILURE;
                }
            }
            EXIT_OK
        }
        Command::Validate { config, resolution } => {
            let Some(config) = load(&config, err) else { return EXIT_CONFIG };
            match experiment::validate(&config, resolution) {
                Ok(report) => {
                    let _ = out.write_all(report.render().as_bytes());
                    if report.passed() { EXIT_OK } else { EXIT_FAILURE }
                }
                Err(e) => {
                    let _ = writeln!(err, "validation error: {e}");
                    EXIT_FAILURE
                }
            }
        }
        Command::Simulate { config, out: dir, seed } => {
            let Some(config) = load(&config, err) else { return EXIT_CONFIG };
            let config = match resolve_seed(config, seed) {
                Ok(c) => c,
                Err(e) => {
                    let _ = writeln!(err, "config error: {e}");
                    return EXIT_CONFIG;
                }
            };
            let rows = experiment::simulate(&config);
            print_sweep_summary(&rows, out);
            let dir = dir.unwrap_or_else(|| config.output_dir.clone());
            if let Err(e) = write_file(&dir.join(SWEEP_FILE), &table::sweep_to_string(&rows)) {
                let _ = writeln!(err, "cannot write {}: {e}", dir.display());
                return EXIT_FAILURE;
            }
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                let _ = writeln!(err, "{failed} of {} cells failed", rows.len());
            }
            if rows.iter().all(is_saturated) { EXIT_SATURATED } else { EXIT_OK }
        }
        Command::Chart { config, out: dir } => {
            let Some(config) = load(&config, err) else { return EXIT_CONFIG };
            let mut series = match experiment::analyze(&config) {
                Ok(rows) => analytic_series(&rows),
                Err(e) => {
                    let _ = writeln!(err, "analyze failed: {e}");
                    return EXIT_FAILURE;
                }
            };
            let sweep = dir.join(SWEEP_FILE);
            if sweep.exists() {
                match table::read_sweep_file(&sweep) {
                    Ok(rows) => {
                        let own: Vec<SweepRow> =
                            rows.into_iter().filter(|r| r.scenario == config.label).collect();
                        series.extend(simulated_series(&own));
                    }
                    Err(e) => {
                        let _ = writeln!(err, "cannot read {}: {e}", sweep.display());
                        return EXIT_FAILURE;
                    }
                }
            }
            let path = dir.join(format!("{}.svg", config.label));
            if let Err(e) = write_file(&path, &render_svg(&config.label, &series)) {
                let _ = writeln!(err, "cannot write {}: {e}", path.display());
                return EXIT_FAILURE;
            }
            let _ = writeln!(out, "wrote {}", path.display());
            EXIT_OK
        }
        Command::Split { config, lambda } => {
            let Some(config) = load(&config, err) else { return EXIT_CONFIG };
            match experiment::describe_split(&config.cluster, lambda) {
                Ok(text) => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                Err(e) => {
                    let _ = writeln!(err, "invalid arrival rate: {e}");
                    EXIT_CONFIG
                }
            }
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli, out, err),
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                EXIT_CONFIG
            } else {
                let _ = write!(out, "{e}");
                EXIT_OK
            }
        }
    }
}
