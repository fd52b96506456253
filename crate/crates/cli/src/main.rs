//! `sigrecon`: batch driver for signature, CDE, tree, independence and
//! reconstruction experiments.
//!
//! Exit status: 0 on success, 1 when a run fails or its verdict does not
//! pass, 2 for invalid usage or configuration.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use commands::{Family, IndependenceCheck, Outcome};
use config::ExperimentConfig;
use sigrecon::word::Word;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Library(#[from] sigrecon::error::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "sigrecon", version, about = "Signature reconstruction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Default)]
struct OutArgs {
    /// Write the JSON artifact here instead of standard output.
    #[arg(long)]
    json_out: Option<PathBuf>,
    /// Write the CSV artifact here instead of standard output.
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Truncated signature of the configured path (JSON).
    Sig {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        level: Option<usize>,
    },
    /// Solve the controlled equation and dump the trajectory (CSV).
    Solve {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Scale of the vector fields.
        #[arg(long)]
        r: Option<f64>,
    },
    /// Enumerate the labeled recursive and rooted operator trees of a word (CSV).
    Trees {
        /// Comma-separated letters, e.g. 1,2,1.
        #[arg(long)]
        word: Word,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Numerical rank certificates for tree fields and word operators (JSON).
    Independence {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        level: Option<usize>,
        /// Families that must be independent for a zero exit status.
        #[arg(long, value_enum, default_value = "both")]
        family: Family,
        /// Check the cyclic dependency of three fields on a line instead.
        #[arg(long, conflicts_with = "check_remark39")]
        check_remark37: bool,
        /// Check proportionality of the two ladder summands instead.
        #[arg(long)]
        check_remark39: bool,
    },
    /// Recover the signature from CDE solutions (JSON report and CSV table).
    Reconstruct {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        level: Option<usize>,
    },
    /// End-to-end run on two fields in the plane; prints the error table.
    Demo {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

/// Which artifact goes to standard output when no file is configured for it.
#[derive(Clone, Copy, PartialEq)]
enum Primary {
    Json,
    Csv,
    Text,
}

fn load(args: &ConfigArgs, level: Option<usize>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if let Some(l) = level {
        cfg.level = l;
    }
    if args.out.json_out.is_some() {
        cfg.output.json.clone_from(&args.out.json_out);
    }
    if args.out.csv_out.is_some() {
        cfg.output.csv.clone_from(&args.out.csv_out);
    }
    cfg.resolve();
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(outcome: &Outcome, primary: Primary, json_path: Option<&Path>, csv_path: Option<&Path>) -> Result<(), CliError> {
    let json_text = outcome
        .json
        .as_ref()
        .map(|v| serde_json::to_string_pretty(v).expect("serializable") + "\n");
    if let (Some(p), Some(t)) = (json_path, &json_text) {
        write_file(p, t)?;
    }
    if let (Some(p), Some(t)) = (csv_path, &outcome.csv) {
        write_file(p, t)?;
    }
    match primary {
        Primary::Json if json_path.is_none() => print!("{}", json_text.unwrap_or_default()),
        Primary::Csv if csv_path.is_none() => print!("{}", outcome.csv.clone().unwrap_or_default()),
        Primary::Text => print!("{}", outcome.text.clone().unwrap_or_default()),
        _ => {}
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Option<String>, CliError> {
    let (outcome, primary, json_path, csv_path) = match cli.command {
        Command::Sig { cfg, level } => {
            let c = load(&cfg, level)?;
            (commands::sig(&c)?, Primary::Json, c.output.json, c.output.csv)
        }
        Command::Solve { cfg, r } => {
            let mut c = load(&cfg, None)?;
            if let Some(r) = r {
                c.r = r;
                c.validate()?;
            }
            (commands::solve(&c)?, Primary::Csv, c.output.json, c.output.csv)
        }
        Command::Trees { word, out } => {
            if word.is_empty() {
                return Err(CliError::Usage("the word must have at least one letter".into()));
            }
            (commands::trees(&word)?, Primary::Csv, out.json_out, out.csv_out)
        }
        Command::Independence {
            cfg,
            level,
            family,
            check_remark37,
            check_remark39,
        } => {
            let c = load(&cfg, level)?;
            let check = if check_remark37 {
                IndependenceCheck::Remark37
            } else if check_remark39 {
                IndependenceCheck::Remark39
            } else {
                IndependenceCheck::Certificate(family)
            };
            let outcome = commands::independence(&c, check).map_err(|e| match e {
                CliError::Library(
                    err @ (sigrecon::error::Error::InvalidArgument(_)
                    | sigrecon::error::Error::Shape(_)
                    | sigrecon::error::Error::Budget(_)),
                ) => CliError::Usage(err.to_string()),
                other => other,
            })?;
            (outcome, Primary::Json, c.output.json, c.output.csv)
        }
        Command::Reconstruct { cfg, level } => {
            let c = load(&cfg, level)?;
            (commands::reconstruct(&c)?, Primary::Json, c.output.json, c.output.csv)
        }
        Command::Demo { seed, out } => (commands::demo(seed)?, Primary::Text, out.json_out, out.csv_out),
    };
    emit(&outcome, primary, json_path.as_deref(), csv_path.as_deref())?;
    Ok(outcome.failed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(verdict)) => {
            eprintln!("sigrecon: verdict failed: {verdict}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("sigrecon: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
