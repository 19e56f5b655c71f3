//! Experiment harness: configuration, orchestration, and result
//! persistence for the sharpdro library.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

/// Harness errors carry their exit semantics: usage and configuration
/// problems exit 1, runtime failures exit 2 (with a manifest pointer when
/// one was written).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}{}", .1.as_ref().map(|p| format!(" (manifest: {})", p.display())).unwrap_or_default())]
    Runtime(String, Option<PathBuf>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(..) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sharpdro",
    version,
    about = "Worst-case sharpness minimization over Poisson-severity corruptions"
)]
pub struct Cli {
    /// Worker threads for parallel sections (0 = library default). The
    /// thread count never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate corrupted train/test datasets and write their containers.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one method and write its record, results table, and parameters.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Load datasets from a `generate` output directory instead of
        /// regenerating them from the config.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Evaluate saved parameters on the test split.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Also emit a 2-D loss-surface slice.
        #[arg(long)]
        surface: bool,
    },
    /// Train across a list of perturbation scales and tabulate accuracy.
    SweepRho {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated perturbation scales.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.01, 0.05, 0.1, 0.5, 1.0, 2.0])]
        rhos: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1u64, 2, 3])]
        seeds: Vec<u64>,
    },
    /// Train several methods side by side and tabulate accuracy.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated method names.
        #[arg(long, value_delimiter = ',', default_values_t = vec![
            "GroupDRO".to_string(), "SAM".to_string(), "SharpDROAware".to_string()
        ])]
        methods: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1u64, 2, 3, 4, 5])]
        seeds: Vec<u64>,
    },
    /// Audit the minimax convergence guarantees on the analytic testbed.
    MinimaxVerify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run even when the step sizes violate the guarantee's constraints.
        #[arg(long)]
        force: bool,
    },
    /// Merge result tables from several run directories.
    Report {
        #[arg(long)]
        out: PathBuf,
        /// Run directories containing results.csv and manifest.json.
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Merge even when tool versions differ.
        #[arg(long)]
        force: bool,
    },
}

fn read_config(path: &PathBuf) -> Result<config::ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    config::parse_config(&text)
}

/// Entry point shared by the binary and the test suite; returns the
/// process exit code.
pub fn run(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are success, everything else is usage
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };

    if cli.threads > 0 {
        // a failed build means the global pool is already set; fine for tests
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    let threads = rayon::current_num_threads();

    let result = match &cli.command {
        Command::Generate { config, out } => {
            read_config(config).and_then(|cfg| commands::generate::run(&cfg, out, threads))
        }
        Command::Train { config, out, data } => read_config(config)
            .and_then(|cfg| commands::train::run(&cfg, out, data.as_deref(), threads)),
        Command::Evaluate {
            config,
            params,
            out,
            data,
            surface,
        } => read_config(config).and_then(|cfg| {
            commands::evaluate::run(&cfg, params, out, data.as_deref(), *surface, threads)
        }),
        Command::SweepRho {
            config,
            out,
            rhos,
            seeds,
        } => read_config(config)
            .and_then(|cfg| commands::sweep_rho::run(&cfg, out, rhos, seeds, threads)),
        Command::Compare {
            config,
            out,
            methods,
            seeds,
        } => read_config(config)
            .and_then(|cfg| commands::compare::run(&cfg, out, methods, seeds, threads)),
        Command::MinimaxVerify { config, out, force } => read_config(config)
            .and_then(|cfg| commands::minimax_verify::run(&cfg, out, *force, threads)),
        Command::Report { out, runs, force } => commands::report::run(out, runs, *force),
    };

    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
