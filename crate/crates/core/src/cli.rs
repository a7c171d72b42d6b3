//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Mode, Settings};
use crate::pipeline;

#[derive(Debug, Parser)]
#[command(
    name = "apst",
    version,
    about = "Segment-mean approximation and nearest-neighbour forecasting of price series"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduce the input to one segment-mean value per partition
    Approximate(CommonArgs),
    /// Forecast the values following the end of the input
    Predict(CommonArgs),
    /// Walk-forward backtest with MER / MAE
    Backtest(CommonArgs),
    /// Backtest against the persistence baseline, with per-step plot data
    Compare(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat TOML file keyed by long flag names; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

impl Command {
    fn split(self) -> (Mode, CommonArgs) {
        match self {
            Command::Approximate(a) => (Mode::Approximate, a),
            Command::Predict(a) => (Mode::Predict, a),
            Command::Backtest(a) => (Mode::Backtest, a),
            Command::Compare(a) => (Mode::Compare, a),
        }
    }
}

/// Parses `args`, runs the pipeline and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let (mode, common) = cli.command.split();
    let settings = match &common.config {
        Some(path) => match Settings::from_file(path) {
            Ok(file) => common.settings.or(file),
            Err(e) => {
                eprintln!("error: config failed: {e}");
                return 2;
            }
        },
        None => common.settings,
    };
    let config = match settings.resolve(mode) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config failed: {e}");
            return 2;
        }
    };
    match pipeline::run(&config) {
        Ok(summary) => {
            eprintln!("{}", summary.message);
            for path in &summary.outputs {
                eprintln!("wrote {}", path.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
