//! Command-line front end.
//!
//! Exit status: 0 on success, 1 for configuration or usage errors, 2 for
//! failures while running or writing output.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::engine;
use crate::sweep::run_sweep;
pub use config::{dump_config, parse_config, ParseError, RunConfig};
pub use output::emit_sweep_csv;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const CELLS_FILE: &str = "sweep.csv";
pub const OPTIMUM_FILE: &str = "optimum.csv";

#[derive(Debug, Parser)]
#[command(name = "farmsim", version, about = "Self-organizing fault-monitoring farm simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and print its metrics.
    Run {
        #[command(flatten)]
        common: Common,
        /// Write a per-tick, per-DSP trace CSV.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
    },
    /// Run the steepness × error-rate grid and write sweep.csv and optimum.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Output directory, created if missing.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Validate a configuration without running it.
    Check {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["Z", "W"])]
    seed: Option<Vec<u32>>,
    /// Sigmoid steepness (for `sweep`, replaces the d grid).
    #[arg(long)]
    d: Option<f64>,
    /// Per-DSP per-tick fault probability (for `sweep`, replaces the rate grid).
    #[arg(long = "error-rate")]
    error_rate: Option<f64>,
    #[arg(long)]
    ticks: Option<u64>,
    /// Worker threads for sweep cells.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Suppress informational messages.
    #[arg(long)]
    quiet: bool,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Common {
    fn load(&self) -> Result<RunConfig, Failure> {
        let text = match &self.config {
            Some(p) => fs::read_to_string(p)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut cfg = parse_config(&text).map_err(|e| Failure::Config(e.to_string()))?;
        if let Some(s) = &self.seed {
            cfg.engine.seed = (s[0], s[1]);
        }
        if let Some(d) = self.d {
            cfg.engine.scheduler.d = d;
            cfg.grid.d_values = vec![d];
        }
        if let Some(e) = self.error_rate {
            cfg.engine.error_rate = e;
            cfg.grid.error_rates = vec![e];
        }
        if let Some(t) = self.ticks {
            cfg.engine.ticks = t;
        }
        if self.parallel == 0 {
            return Err(Failure::Config("--parallel: must be >= 1".into()));
        }
        cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
        Ok(cfg)
    }

    fn info(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Check { common } => {
            common.load()?;
            common.info("configuration ok");
        }
        Command::Run { common, trace } => {
            let cfg = common.load()?;
            let metrics = match &trace {
                Some(path) => {
                    let sink = create(path)?;
                    let (metrics, rows) =
                        engine::run_traced(&cfg.engine).map_err(|e| Failure::Config(e.to_string()))?;
                    let n = output::write_trace_csv(&rows, sink)
                        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
                    common.info(&format!("wrote {n} bytes of trace to {}", path.display()));
                    metrics
                }
                None => engine::run(&cfg.engine).map_err(|e| Failure::Config(e.to_string()))?,
            };
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(output::metrics_report(&metrics).as_bytes())
                .map_err(|e| Failure::Runtime(e.to_string()))?;
        }
        Command::Sweep { common, out } => {
            let cfg = common.load()?;
            common.info(&format!(
                "sweeping {} cells on {} worker(s)",
                cfg.grid.len(),
                common.parallel
            ));
            let result = run_sweep(&cfg.grid, &cfg.engine, common.parallel).map_err(|e| match e {
                crate::sweep::SweepError::Pool(_) => Failure::Runtime(e.to_string()),
                _ => Failure::Config(e.to_string()),
            })?;
            fs::create_dir_all(&out)
                .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out.display())))?;
            let cells_path = out.join(CELLS_FILE);
            let opt_path = out.join(OPTIMUM_FILE);
            let n = emit_sweep_csv(&result, create(&cells_path)?, create(&opt_path)?)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
            for o in &result.optimum {
                common.info(&format!(
                    "error_rate {:<8} optimum d {:<14} throughput {}",
                    output::fmt_real(o.error_rate),
                    output::fmt_real(o.d),
                    output::fmt_real(o.throughput)
                ));
            }
            common.info(&format!("wrote {n} bytes to {} and {}", cells_path.display(), opt_path.display()));
        }
    }
    Ok(())
}

/// Parses `argv` (including the program name) and runs the command.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_RUNTIME
        }
    }
}
