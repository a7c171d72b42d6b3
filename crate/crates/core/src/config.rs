//! Run configuration: flags, config files and defaults.
//!
//! Every setting can come from a command-line flag or from a flat TOML file
//! whose keys are the long flag names (`partition-size = 27`). Flags win over
//! the file, the file wins over the defaults.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;
use thiserror::Error;

use crate::eval::DEFAULT_START_FRACTION;
use crate::ingest::{ColumnRef, CsvSchema};
use crate::knn::ForecastConfig;
use crate::msm::{validate_params, ApproxParams};
use crate::report::OutputFormat;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config file {}: {source}", path.display())]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
    #[error("invalid setting: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Approximate,
    Predict,
    Backtest,
    Compare,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Approximate => "approximate",
            Mode::Predict => "predict",
            Mode::Backtest => "backtest",
            Mode::Compare => "compare",
        }
    }
}

/// Partially specified settings, as given by flags or a config file.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// Input CSV file of prices
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output file (stdout when omitted)
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Partition size K (must be a power of the segment size)
    #[arg(long, short = 'K')]
    pub partition_size: Option<usize>,
    /// Segment size t
    #[arg(long, short = 't')]
    pub segment_size: Option<usize>,
    /// Pattern window w
    #[arg(long, short = 'w')]
    pub window: Option<usize>,
    /// Number of nearest neighbours k
    #[arg(long, short = 'k')]
    pub neighbors: Option<usize>,
    /// Number of values to predict m
    #[arg(long, short = 'm')]
    pub horizon: Option<usize>,
    /// Maximum neighbour distance
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Fraction of the approximated series used as initial history
    #[arg(long)]
    pub start_fraction: Option<f64>,
    /// Price column, by header name or zero-based index (default: last)
    #[arg(long)]
    pub price_column: Option<ColumnRef>,
    /// Date column, by header name or zero-based index
    #[arg(long)]
    pub date_column: Option<ColumnRef>,
    #[arg(long)]
    pub delimiter: Option<char>,
    /// Input has no header row
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_header: Option<bool>,
    /// Drop rows whose price does not parse instead of failing
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub skip_bad_rows: Option<bool>,
    /// Include the full segment-mean trees in approximate output
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub emit_trees: Option<bool>,
}

macro_rules! overlay {
    ($hi:ident, $lo:ident, $($field:ident),*) => {
        Settings { $($field: $hi.$field.or($lo.$field)),* }
    };
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Field-wise `self` if set, else `fallback`.
    pub fn or(self, fallback: Settings) -> Settings {
        let hi = self;
        let lo = fallback;
        overlay!(
            hi,
            lo,
            input,
            output,
            format,
            partition_size,
            segment_size,
            window,
            neighbors,
            horizon,
            threshold,
            start_fraction,
            price_column,
            date_column,
            delimiter,
            no_header,
            skip_bad_rows,
            emit_trees
        )
    }

    /// Fills defaults and validates every nested parameter.
    pub fn resolve(self, mode: Mode) -> Result<RunConfig, ConfigError> {
        let defaults = ForecastConfig::default();
        let approx = ApproxParams::new(
            self.partition_size
                .unwrap_or(ApproxParams::default().partition_size),
            self.segment_size.unwrap_or(ApproxParams::default().segment_size),
        );
        validate_params(approx).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let forecast = ForecastConfig {
            window: self.window.unwrap_or(defaults.window),
            neighbors: self.neighbors.unwrap_or(defaults.neighbors),
            horizon: self.horizon.unwrap_or(defaults.horizon),
            threshold: self.threshold,
        };
        forecast
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let start_fraction = self.start_fraction.unwrap_or(DEFAULT_START_FRACTION);
        if !(start_fraction > 0.0 && start_fraction < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "start-fraction must lie in (0, 1), got {start_fraction}"
            )));
        }
        let delimiter = self.delimiter.unwrap_or(',');
        if !delimiter.is_ascii() {
            return Err(ConfigError::Invalid(format!(
                "delimiter must be a single ASCII character, got {delimiter:?}"
            )));
        }
        Ok(RunConfig {
            mode,
            approx,
            forecast,
            start_fraction,
            input: self.input.ok_or(ConfigError::Missing("input"))?,
            output: self.output,
            format: self.format.unwrap_or(OutputFormat::Json),
            schema: CsvSchema {
                date_column: self.date_column,
                price_column: self.price_column,
                has_header: !self.no_header.unwrap_or(false),
                delimiter: delimiter as u8,
                skip_bad_rows: self.skip_bad_rows.unwrap_or(false),
            },
            emit_trees: self.emit_trees.unwrap_or(false),
        })
    }
}

/// Fully resolved parameters for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub approx: ApproxParams,
    pub forecast: ForecastConfig,
    pub start_fraction: f64,
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub schema: CsvSchema,
    pub emit_trees: bool,
}
