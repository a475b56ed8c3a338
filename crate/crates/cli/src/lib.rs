//! Command-line front end: config parsing, experiment runs, the invariant
//! suite and parameter sweeps.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod suite;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_run, cmd_sweep, cmd_validate, SweepAxis};
pub use config::{parse_config, parse_config_str, Overrides};
pub use error::{CliError, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION};

#[derive(Debug, Parser)]
#[command(name = "nrqfl", version, about = "Noise-resilient quantum federated learning simulator")]
pub struct Cli {
    /// JSON experiment config; defaults apply to missing keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Comma-separated strategies (fedavg, qfl, nrqfl).
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    pub strategy: Option<Vec<String>>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured strategies and write rounds.csv and summary.json.
    Run,
    /// Run the invariant suite.
    Validate {
        /// Inject a channel with an incomplete Kraus set.
        #[arg(long)]
        break_channel: bool,
    },
    /// Run one experiment per axis value and write sweep.csv.
    Sweep {
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated axis values, at least two
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            strategies: self.strategy.clone(),
        }
    }
}

/// Executes a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let cfg = match parse_config(cli.config.as_deref(), &cli.overrides()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let result = match cli.command.as_ref().unwrap_or(&Command::Run) {
        Command::Run => cmd_run(&cfg).map(|summaries| {
            for s in &summaries {
                println!(
                    "{:<7} final accuracy {:.4}  f1 {:.4}  bytes up {}",
                    s.strategy, s.final_accuracy, s.final_f1, s.total_bytes_up
                );
            }
            if let Some(o) = output::communication_overhead(&summaries) {
                println!("nrqfl communication overhead over qfl: {:.2}%", 100.0 * o);
            }
            EXIT_OK
        }),
        Command::Validate { break_channel } => {
            let mut opts = suite::SuiteOptions::new(cfg.noise, cfg.seed);
            opts.break_channel = *break_channel;
            let (code, checks) = cmd_validate(&opts);
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(code)
        }
        Command::Sweep { axis, values } => cmd_sweep(&cfg, *axis, values).map(|rows| {
            println!("wrote {} rows to {}", rows.len(), PathBuf::from(&cfg.output_dir).join("sweep.csv").display());
            EXIT_OK
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("{e}");
        e.exit_code()
    })
}
