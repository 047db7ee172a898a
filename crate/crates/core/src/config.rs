//! Run configuration shared by the command-line front end: optional TOML
//! defaults, command-line overrides and exit-code classification.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::thresholds::ThresholdSearchGrid;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

impl Error {
    /// Exit code class: bad settings, bad/unsuitable data, or a numerical
    /// breakdown.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => exit::CONFIG,
            Error::DimensionMismatch(_)
            | Error::DegenerateData(_)
            | Error::Format { .. }
            | Error::Image { .. }
            | Error::Io(_) => exit::DATA,
            Error::Numerical(_) => exit::NUMERICAL,
        }
    }
}

/// Defaults read from `--config`. Every field is optional; flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub arch: Option<String>,
    pub sigma_n: Option<f64>,
    pub sigma_t: Option<f64>,
    pub seed: Option<u64>,
    pub stride: Option<usize>,
    pub train_stride: Option<usize>,
    pub grid_min: Option<i32>,
    pub grid_max: Option<i32>,
    pub max_pairs: Option<usize>,
    pub batch_size: Option<usize>,
    pub batches: Option<usize>,
    pub iters: Option<usize>,
    pub shave: Option<usize>,
    pub report: Option<ReportFormat>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("bad config file: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    #[default]
    Text,
}

/// Threshold grid from decade bounds, validated.
pub fn grid_from_bounds(min_exp: i32, max_exp: i32) -> Result<ThresholdSearchGrid> {
    if !(-30..=30).contains(&min_exp) || !(-30..=30).contains(&max_exp) {
        return Err(Error::invalid("grid exponents must lie in -30..=30"));
    }
    ThresholdSearchGrid::decades(min_exp, max_exp)
}

/// Checks a noise level given on the command line.
pub fn check_sigma(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")))
    }
}

/// Checks a positive integer setting.
pub fn check_positive(name: &str, v: usize) -> Result<usize> {
    if v == 0 {
        Err(Error::invalid(format!("{name} must be positive")))
    } else {
        Ok(v)
    }
}
