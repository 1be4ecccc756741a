//! `snode`: batch front end over the S-node toolkit.
//!
//! Exit status: 0 when every check passed, 2 on a hypothesis, validation or
//! inequality failure (the report is still written), 1 on usage, parse, I/O
//! or numerical errors.

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use config::{parse_complex, Command, ExperimentConfig, Format, PairSource, DEFAULT_GRID};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "snode",
    version,
    about = "S-node frames, LFT densities, spectral factors and the entropy bound"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the node identity and positivity; report the resolvent spectrum.
    Validate(Flags),
    /// Evaluate the frame and its identities at the --z points.
    Frame(Flags),
    /// Evaluate the linear-fractional Herglotz function and check the pair.
    Lft(Flags),
    /// Extract the boundary density, screen it and factor it.
    Factorize(Flags),
    /// Verify the entropy bound at the --z points.
    Entropy(Flags),
    /// Run the outerness and growth diagnostics.
    Diagnose(Flags),
    /// Run an experiment described by a JSON config file.
    Run {
        /// Config file; relative paths inside it resolve against its directory.
        config: PathBuf,
        /// Overrides the output path of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Flags {
    /// Node file (JSON, complex entries as [re, im]).
    #[arg(long)]
    node: PathBuf,
    /// Pair file, or a builtin: `identity` ({I, I}) or `equality` (needs --lambda).
    #[arg(long)]
    pair: Option<String>,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    lambda: Option<Complex64>,
    /// Evaluation points `a+bi`; repeat the flag or separate with commas.
    #[arg(long = "z", value_parser = parse_complex, allow_hyphen_values = true, value_delimiter = ',')]
    z: Vec<Complex64>,
    /// Circle grid size N (power of two, 256..=65536).
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Centre of the Moebius map.
    #[arg(long, value_parser = parse_complex, default_value = "0+1i", allow_hyphen_values = true)]
    z0: Complex64,
    /// Radius r0 of the hypothesis regions (default: from the spectrum).
    #[arg(long)]
    r0: Option<f64>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

impl Flags {
    fn into_config(self, command: Command) -> ExperimentConfig {
        ExperimentConfig {
            command,
            node: self.node,
            pair: self.pair.as_deref().map(PairSource::parse),
            lambda: self.lambda,
            z_points: self.z,
            grid: self.grid,
            z0: self.z0,
            r0: self.r0,
            tolerances: Default::default(),
            output: self.out,
            format: self.format,
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::FileNotFound(path.to_owned()),
        _ => CliError::Io {
            path: path.to_owned(),
            source: e,
        },
    })
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SNODE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("SNODE_THREADS must be a positive integer, got {v:?}")))?;
    // Fails only when a pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    let cfg = match cli.command {
        Cmd::Validate(f) => f.into_config(Command::Validate),
        Cmd::Frame(f) => f.into_config(Command::Frame),
        Cmd::Lft(f) => f.into_config(Command::Lft),
        Cmd::Factorize(f) => f.into_config(Command::Factorize),
        Cmd::Entropy(f) => f.into_config(Command::Entropy),
        Cmd::Diagnose(f) => f.into_config(Command::Diagnose),
        Cmd::Run { config, out } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if out.is_some() {
                cfg.output = out;
            }
            cfg
        }
    };
    let outcome = commands::run(&cfg)?;
    match &cfg.output {
        Some(path) => output::write_atomic(path, &outcome.body)?,
        None => print!("{}", outcome.body),
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
