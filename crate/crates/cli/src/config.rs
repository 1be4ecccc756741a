//! Experiment configuration, from flags or from a JSON file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use serde::Deserialize;
use snode_core::ToleranceSet;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Validate,
    Frame,
    Lft,
    Factorize,
    Entropy,
    Diagnose,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Frame => "frame",
            Command::Lft => "lft",
            Command::Factorize => "factorize",
            Command::Entropy => "entropy",
            Command::Diagnose => "diagnose",
        }
    }

    fn needs_pair(self) -> bool {
        matches!(self, Command::Lft | Command::Factorize | Command::Entropy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Where the pair comes from: a JSON file or a builtin.
#[derive(Debug, Clone, PartialEq)]
pub enum PairSource {
    File(PathBuf),
    /// `{I, I}`.
    Identity,
    /// The equality-case pair at `lambda`.
    Equality,
}

impl PairSource {
    pub fn parse(s: &str) -> Self {
        match s {
            "identity" => PairSource::Identity,
            "equality" => PairSource::Equality,
            path => PairSource::File(PathBuf::from(path)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: Command,
    pub node: PathBuf,
    pub pair: Option<PairSource>,
    pub lambda: Option<Complex64>,
    pub z_points: Vec<Complex64>,
    pub grid: usize,
    pub z0: Complex64,
    pub r0: Option<f64>,
    pub tolerances: ToleranceSet,
    pub output: Option<PathBuf>,
    pub format: Format,
}

pub const DEFAULT_GRID: usize = 4096;
pub const MIN_GRID: usize = 256;
pub const MAX_GRID: usize = 65536;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if !self.grid.is_power_of_two() || !(MIN_GRID..=MAX_GRID).contains(&self.grid) {
            return usage(format!(
                "grid N = {} must be a power of two in [{MIN_GRID}, {MAX_GRID}]",
                self.grid
            ));
        }
        if let Some(z) = self.z_points.iter().find(|z| !(z.im > 0.0)) {
            return usage(format!("z point {z} is not in the upper half-plane"));
        }
        if !(self.z0.im > 0.0) {
            return usage(format!("z0 = {} must have positive imaginary part", self.z0));
        }
        if self.command.needs_pair() && self.pair.is_none() {
            return usage(format!("{} needs --pair", self.command.name()));
        }
        if self.pair == Some(PairSource::Equality) && self.lambda.is_none() {
            return usage("the equality pair needs --lambda".into());
        }
        if let Some(l) = self.lambda {
            if !(l.im > 0.0) {
                return usage(format!("lambda = {l} is not in the upper half-plane"));
            }
        }
        Ok(())
    }

    /// Loads a config file. Paths inside it are relative to the file.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = crate::read_file(path)?;
        let doc: ConfigFile = serde_json::from_str(&text).map_err(|e| CliError::ConfigParse {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let c = |v: [f64; 2]| Complex64::new(v[0], v[1]);
        Ok(Self {
            command: doc.command,
            node: base.join(doc.node),
            pair: doc.pair.map(|p| match PairSource::parse(&p) {
                PairSource::File(f) => PairSource::File(base.join(f)),
                other => other,
            }),
            lambda: doc.lambda.map(c),
            z_points: doc.z_points.into_iter().map(c).collect(),
            grid: doc.grid.unwrap_or(DEFAULT_GRID),
            z0: doc.z0.map(c).unwrap_or(Complex64::new(0.0, 1.0)),
            r0: doc.r0,
            tolerances: doc.tolerances.unwrap_or_default(),
            output: doc.output.map(|o| base.join(o)),
            format: doc.format.unwrap_or_default(),
        })
    }
}

/// File form of [`ExperimentConfig`]; complex numbers as `[re, im]`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct ConfigFile {
    command: Command,
    node: PathBuf,
    pair: Option<String>,
    lambda: Option<[f64; 2]>,
    #[serde(default)]
    z_points: Vec<[f64; 2]>,
    grid: Option<usize>,
    z0: Option<[f64; 2]>,
    r0: Option<f64>,
    tolerances: Option<ToleranceSet>,
    output: Option<PathBuf>,
    format: Option<Format>,
}

/// Parses `a+bi`, `a-bi`, `bi`, `a`, `i`.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    Complex64::from_str(&t).map_err(|_| format!("cannot parse {s:?} as a complex number (expected a+bi)"))
}
