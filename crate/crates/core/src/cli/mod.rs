//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, and one code per error category
//! (see [`exit_code`]).

mod commands;
mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{DataSection, GradcheckSection, RunConfig, SynthPreset, SynthSection};

use crate::error::{Error, ErrorCategory, Result};

pub const EXIT_CONFIG: i32 = 10;
pub const EXIT_DATA: i32 = 11;
pub const EXIT_NUMERIC: i32 = 12;
pub const EXIT_FORMAT: i32 = 13;
pub const EXIT_IO: i32 = 14;

pub fn exit_code(err: &Error) -> i32 {
    match err.category() {
        ErrorCategory::Config => EXIT_CONFIG,
        ErrorCategory::Data => EXIT_DATA,
        ErrorCategory::Numeric => EXIT_NUMERIC,
        ErrorCategory::Format => EXIT_FORMAT,
        ErrorCategory::Io => EXIT_IO,
    }
}

#[derive(Debug, Parser)]
#[command(name = "qrnn-cti", version, about = "Hybrid CNN + QRNN threat classifier")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Parent directory for run outputs.
    #[arg(long, global = true, value_name = "DIR", default_value = "runs")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter, encode, scale and split a flow CSV.
    Preprocess {
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Train a model and write a checkpoint.
    Train {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Time the QRNN hybrid against the LSTM hybrid.
    Bench {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Finite-difference check of every layer's gradients.
    Gradcheck,
    /// Write a synthetic flow CSV, its schema and a dataset file.
    Synth,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Preprocess { .. } => "preprocess",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Bench { .. } => "bench",
            Command::Gradcheck => "gradcheck",
            Command::Synth => "synth",
        }
    }
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(dir) => {
            println!("output: {}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let d = &mut cfg.data;
    match &cli.command {
        Command::Preprocess { csv, schema } => {
            d.csv = csv.clone().or(d.csv.take());
            d.schema = schema.clone().or(d.schema.take());
        }
        Command::Train { train, epochs } => {
            d.train = train.clone().or(d.train.take());
            if let Some(e) = epochs {
                cfg.train.epochs = *e;
            }
        }
        Command::Eval { checkpoint, test } => {
            d.checkpoint = checkpoint.clone().or(d.checkpoint.take());
            d.test = test.clone().or(d.test.take());
        }
        Command::Bench { train, test } => {
            d.train = train.clone().or(d.train.take());
            d.test = test.clone().or(d.test.take());
        }
        Command::Gradcheck | Command::Synth => {}
    }
    cfg.materialize()?;
    Ok(cfg)
}

/// Create `<out>/<command>-seed<N>-<UTC timestamp>`, adding a numeric
/// suffix if that name is taken.
fn run_dir(out: &Path, command: &str, seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(out).map_err(|e| Error::from(e).in_file(out))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let base = format!("{command}-seed{seed}-{stamp}");
    for n in 0.. {
        let name = if n == 0 {
            base.clone()
        } else {
            format!("{base}-{n}")
        };
        let dir = out.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::from(e).in_file(dir)),
        }
    }
    unreachable!()
}

fn execute(cli: &Cli) -> Result<PathBuf> {
    let cfg = resolve_config(cli)?;
    let name = cli.command.name();
    let dir = run_dir(&cli.out, name, cfg.seed())?;
    commands::write_text(&dir.join("config.toml"), &cfg.to_toml()?)?;
    match cli.command {
        Command::Preprocess { .. } => commands::preprocess(&cfg, &dir)?,
        Command::Train { .. } => commands::train(&cfg, &dir)?,
        Command::Eval { .. } => commands::eval(&cfg, &dir)?,
        Command::Bench { .. } => commands::bench(&cfg, &dir)?,
        Command::Gradcheck => commands::gradcheck(&cfg, &dir)?,
        Command::Synth => commands::synth(&cfg, &dir)?,
    }
    Ok(dir)
}
