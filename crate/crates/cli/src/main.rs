//! Command-line front end: runs scenarios, the identity and lemma suites,
//! lists the built-in scenario library and converts saved reports.
//!
//! Exit codes: 0 ok, 1 statistical warnings only, 2 invariant failure,
//! 3 config or I/O error. Flags can also be set through EXPZERO_*
//! environment variables.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use expzero::harness::{
    self, builtin_names, builtin_scenario, emit_report, run_identity_suite, run_lemma_suite,
    run_scenario, ExitStatus, HarnessError, ReportFormat, RunOptions,
};
use expzero::model::{validate, ScenarioSpec};

#[derive(Parser)]
#[command(name = "expzero", version, about = "Stochastic exponential simulation and verification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Args)]
struct ScenarioSource {
    /// Scenario JSON config file
    #[arg(long, env = "EXPZERO_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in scenario name (S0..S5), used when --config is absent
    #[arg(long, env = "EXPZERO_SCENARIO", value_name = "NAME")]
    scenario: Option<String>,
    /// Override the base seed
    #[arg(long, env = "EXPZERO_SEED")]
    seed: Option<u64>,
    /// Override the number of paths
    #[arg(long, env = "EXPZERO_PATHS")]
    paths: Option<u64>,
    /// Override the grid step
    #[arg(long, env = "EXPZERO_DT")]
    dt: Option<f64>,
}

#[derive(Args)]
struct RunFlags {
    /// Numerically-zero threshold for E_T
    #[arg(long = "threshold-zero", env = "EXPZERO_THRESHOLD_ZERO", default_value_t = harness::DEFAULT_THETA)]
    threshold_zero: f64,
    /// Numerically-divergent threshold for the statistics
    #[arg(long = "threshold-div", env = "EXPZERO_THRESHOLD_DIV", default_value_t = harness::DEFAULT_K_DIV)]
    threshold_div: f64,
    /// Worker threads (0 = all cores)
    #[arg(long, env = "EXPZERO_JOBS", default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and emit per-path rows plus a summary
    Simulate {
        #[command(flatten)]
        source: ScenarioSource,
        #[command(flatten)]
        run: RunFlags,
        /// Output file (stdout when absent)
        #[arg(long, env = "EXPZERO_OUT")]
        out: Option<PathBuf>,
        #[arg(long, env = "EXPZERO_FORMAT", value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run the exact-identity suite over a scenario
    Identities {
        #[command(flatten)]
        source: ScenarioSource,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Sweep the scalar lemma checks over a grid
    Lemma {
        #[arg(long, default_value_t = 100_000)]
        grid_size: u64,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
    },
    /// List built-in scenarios or print one as JSON
    Scenario {
        /// Name to print; lists all names when absent
        name: Option<String>,
    },
    /// Convert a saved JSON report to csv or json
    Report {
        /// Input JSON report (as written by `simulate --format json`)
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        #[arg(long, env = "EXPZERO_OUT")]
        out: Option<PathBuf>,
        #[arg(long, env = "EXPZERO_FORMAT", value_enum, default_value = "csv")]
        format: Format,
    },
}

const EXIT_CONFIG: u8 = 3;

fn load_spec(source: &ScenarioSource) -> Result<ScenarioSpec, String> {
    let mut spec = if let Some(path) = &source.config {
        let file = File::open(path).map_err(|e| format!("cannot open {}: {e}", path.display()))?;
        serde_json::from_reader(BufReader::new(file))
            .map_err(|e| format!("config parse error: {e}"))?
    } else if let Some(name) = &source.scenario {
        builtin_scenario(name).ok_or_else(|| {
            format!(
                "unknown scenario `{name}` (available: {})",
                builtin_names().join(", ")
            )
        })?
    } else {
        return Err("one of --config or --scenario is required".into());
    };
    if let Some(seed) = source.seed {
        spec.base_seed = seed;
    }
    if let Some(paths) = source.paths {
        spec.n_paths = paths;
    }
    if let Some(dt) = source.dt {
        spec.grid_dt = dt;
    }
    validate(&spec).map_err(|e| format!("invalid scenario [{}]: {e}", e.code()))?;
    Ok(spec)
}

fn writer_for(out: &Option<PathBuf>) -> Result<Box<dyn Write>, String> {
    match out {
        Some(path) => {
            let f = File::create(path)
                .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn harness_exit(err: HarnessError) -> u8 {
    eprintln!("error: {err}");
    EXIT_CONFIG
}

fn run() -> u8 {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            source,
            run,
            out,
            format,
        } => {
            let spec = match load_spec(&source) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            };
            let opts = RunOptions {
                theta: run.threshold_zero,
                k_div: run.threshold_div,
                jobs: run.jobs,
            };
            let outcome = match run_scenario(&spec, &opts) {
                Ok(o) => o,
                Err(e) => return harness_exit(e),
            };
            let mut w = match writer_for(&out) {
                Ok(w) => w,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            };
            if let Err(e) = emit_report(&outcome.rows, &outcome.summary, format.into(), &mut w) {
                return harness_exit(e);
            }
            for warning in &outcome.summary.warnings {
                eprintln!("{warning}");
            }
            outcome.exit.code() as u8
        }
        Command::Identities { source, run } => {
            let spec = match load_spec(&source) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            };
            let opts = RunOptions {
                theta: harness::DEFAULT_THETA,
                k_div: harness::DEFAULT_K_DIV,
                jobs: run.jobs,
            };
            match run_identity_suite(&spec, &opts) {
                Ok(s) => {
                    println!("{}", serde_json::to_string_pretty(&s).unwrap());
                    if s.pass {
                        ExitStatus::Ok.code() as u8
                    } else {
                        ExitStatus::InvariantFailure.code() as u8
                    }
                }
                Err(e) => harness_exit(e),
            }
        }
        Command::Lemma { grid_size, epsilon } => match run_lemma_suite(grid_size, epsilon) {
            Ok(s) => {
                println!("{}", serde_json::to_string_pretty(&s).unwrap());
                ExitStatus::Ok.code() as u8
            }
            Err(HarnessError::CheckFailed(msg)) => {
                eprintln!("CHECK_FAILED: {msg}");
                ExitStatus::InvariantFailure.code() as u8
            }
            Err(e) => harness_exit(e),
        },
        Command::Scenario { name } => match name {
            None => {
                for n in builtin_names() {
                    println!("{n}");
                }
                0
            }
            Some(name) => match builtin_scenario(&name) {
                Some(spec) => {
                    println!("{}", serde_json::to_string_pretty(&spec).unwrap());
                    0
                }
                None => {
                    eprintln!(
                        "error: unknown scenario `{name}` (available: {})",
                        builtin_names().join(", ")
                    );
                    EXIT_CONFIG
                }
            },
        },
        Command::Report { input, out, format } => {
            let file = match File::open(&input) {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("error: cannot open {}: {e}", input.display());
                    return EXIT_CONFIG;
                }
            };
            let doc: serde_json::Value = match serde_json::from_reader(BufReader::new(file)) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: report parse error: {e}");
                    return EXIT_CONFIG;
                }
            };
            let mut w = match writer_for(&out) {
                Ok(w) => w,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            };
            let result = match format {
                Format::Json => serde_json::to_writer_pretty(&mut w, &doc)
                    .map_err(|e| e.to_string())
                    .and_then(|_| writeln!(w).map_err(|e| e.to_string())),
                Format::Csv => render_rows_csv(&doc, &mut w),
            };
            match result {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_CONFIG
                }
            }
        }
    }
}

/// Re-renders the rows of a saved JSON report as CSV.
fn render_rows_csv(doc: &serde_json::Value, w: &mut dyn Write) -> Result<(), String> {
    let rows = doc
        .get("rows")
        .and_then(|r| r.as_array())
        .ok_or("report has no rows array")?;
    writeln!(w, "{}", harness::CSV_HEADER).map_err(|e| e.to_string())?;
    let columns: Vec<&str> = harness::CSV_HEADER.split(',').collect();
    for row in rows {
        let cells: Vec<String> = columns
            .iter()
            .map(|c| match row.get(*c) {
                Some(serde_json::Value::String(s)) => s.clone(),
                Some(serde_json::Value::Bool(b)) => b.to_string(),
                Some(serde_json::Value::Number(n)) => n.to_string(),
                Some(other) => other.to_string(),
                None => String::new(),
            })
            .collect();
        writeln!(w, "{}", cells.join(",")).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    ExitCode::from(run())
}
