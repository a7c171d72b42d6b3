//! Two-phase forecasting of price series.
//!
//! Prices are first compressed with a multilevel segment-mean approximation
//! ([`msm`]); the approximated sequence is then forecast by Euclidean
//! nearest-neighbour pattern matching ([`knn`]). [`eval`] provides the error
//! metrics and a walk-forward backtest, and [`pipeline`] / [`cli`] wire it all
//! to CSV input and JSON / CSV reports.

pub mod cli;
pub mod config;
pub mod eval;
pub mod ingest;
pub mod knn;
pub mod msm;
pub mod pipeline;
pub mod report;

pub use eval::{
    mean_absolute_error, mean_error_relative, persistence_baseline, walk_forward_backtest, BacktestOutcome,
    BacktestReport, BacktestStep, EvalError,
};
pub use knn::{
    brute_force_knn_oracle, euclidean_distance, extract_pattern, find_neighbors, predict, Forecast,
    ForecastConfig, ForecastError, Neighbor,
};
pub use msm::{
    approximate, build_tree, partition, validate_params, ApproxParams, ApproxSeries, MsmError, MsmTree,
    PriceSeries,
};
