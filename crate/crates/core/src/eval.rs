//! Walk-forward evaluation and forecast error metrics.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knn::{self, ForecastConfig, ForecastError};
use crate::msm::{self, ApproxParams, MsmError, PriceSeries};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Approximation(#[from] MsmError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error("LengthMismatch: {predicted} predictions against {actual} actuals")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("EmptyInput: metrics need at least one prediction")]
    EmptyInput,
    #[error("ZeroPeriodMean: period mean must be positive and finite, got {0}")]
    ZeroPeriodMean(f64),
    #[error("InvalidStartFraction: start fraction must lie in (0, 1), got {0}")]
    InvalidStartFraction(f64),
    #[error("InsufficientHistory: {available} approximated values with first step at {start}; need at least {required} values of history and {horizon} after it")]
    InsufficientHistory {
        available: usize,
        start: usize,
        required: usize,
        horizon: usize,
    },
    #[error("NoCompletedSteps: all {skipped} backtest steps failed")]
    NoCompletedSteps { skipped: usize },
    #[error("EmptyHistory: baseline needs at least one past value")]
    EmptyHistory,
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

fn check_lengths(predicted: &[f64], actual: &[f64]) -> Result<()> {
    if predicted.len() != actual.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

/// `100 / N * Σ |p' - p| / p̄`, in percent.
pub fn mean_error_relative(predicted: &[f64], actual: &[f64], period_mean: f64) -> Result<f64> {
    check_lengths(predicted, actual)?;
    if !(period_mean.is_finite() && period_mean > 0.0) {
        return Err(EvalError::ZeroPeriodMean(period_mean));
    }
    let total: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).abs() / period_mean)
        .sum();
    Ok(100.0 * total / predicted.len() as f64)
}

/// `1 / N * Σ |p' - p|`.
pub fn mean_absolute_error(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(predicted, actual)?;
    let total: f64 = predicted.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum();
    Ok(total / predicted.len() as f64)
}

/// Naive forecast: the last observed value, repeated `m` times.
pub fn persistence_baseline(history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let last = *history.last().ok_or(EvalError::EmptyHistory)?;
    Ok(vec![last; horizon])
}

pub const DEFAULT_START_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestStep {
    /// Index in the approximated series of the first predicted value.
    pub step_index: usize,
    pub predicted: Vec<f64>,
    pub actual: Vec<f64>,
    pub absolute_errors: Vec<f64>,
    pub neighbor_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedStep {
    pub step_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub approx: ApproxParams,
    pub forecast: ForecastConfig,
    pub start_fraction: f64,
    pub approximated_len: usize,
    pub dropped_tail: usize,
    pub first_step: usize,
    pub prediction_count: usize,
    pub period_mean: f64,
    pub mer_percent: f64,
    pub mae: f64,
    pub steps: Vec<BacktestStep>,
    pub skipped: Vec<SkippedStep>,
}

impl BacktestReport {
    pub fn predicted(&self) -> Vec<f64> {
        self.steps
            .iter()
            .flat_map(|s| s.predicted.iter().copied())
            .collect()
    }

    pub fn actual(&self) -> Vec<f64> {
        self.steps.iter().flat_map(|s| s.actual.iter().copied()).collect()
    }
}

/// A report plus the wall-clock time spent inside prediction calls.
///
/// Timing is kept apart from [`BacktestReport`] so that the report itself is
/// a deterministic function of its inputs.
#[derive(Debug, Clone)]
pub struct BacktestOutcome {
    pub report: BacktestReport,
    pub elapsed_prediction_time: Duration,
}

/// Index of the first walk-forward step for an approximated length `n`.
///
/// Rounded to nearest: `0.7 * 90` is `62.999…` in binary floating point.
pub fn first_step_index(n: usize, start_fraction: f64) -> Result<usize> {
    if !(start_fraction > 0.0 && start_fraction < 1.0) {
        return Err(EvalError::InvalidStartFraction(start_fraction));
    }
    Ok((start_fraction * n as f64).round() as usize)
}

/// Expanding-window backtest.
///
/// The series is approximated once. For every `s` from the first step up to
/// `n - m`, a forecast is made from `ap[..s]` alone and scored against
/// `ap[s..s + m]`. Steps whose forecast fails are recorded in `skipped` and
/// excluded from the metrics.
pub fn walk_forward_backtest(
    series: &PriceSeries,
    approx: ApproxParams,
    forecast: ForecastConfig,
    start_fraction: f64,
) -> Result<BacktestOutcome> {
    forecast.validate()?;
    let ap = msm::approximate(series, approx)?;
    let values = ap.values();
    let n = values.len();
    let m = forecast.horizon;
    let first = first_step_index(n, start_fraction)?;
    let required = forecast.window + m + 1;
    if first < required || first + m > n {
        return Err(EvalError::InsufficientHistory {
            available: n,
            start: first,
            required,
            horizon: m,
        });
    }

    let mut steps = Vec::new();
    let mut skipped = Vec::new();
    let mut elapsed = Duration::ZERO;
    for s in first..=n - m {
        let started = Instant::now();
        let result = knn::predict(&values[..s], &forecast);
        elapsed += started.elapsed();
        match result {
            Ok(f) => {
                let actual = values[s..s + m].to_vec();
                let absolute_errors = f.values.iter().zip(&actual).map(|(p, a)| (p - a).abs()).collect();
                steps.push(BacktestStep {
                    step_index: s,
                    neighbor_indices: f.neighbors_used.iter().map(|nb| nb.start_index).collect(),
                    predicted: f.values,
                    actual,
                    absolute_errors,
                });
            }
            Err(e) => skipped.push(SkippedStep {
                step_index: s,
                reason: e.to_string(),
            }),
        }
    }
    if steps.is_empty() {
        return Err(EvalError::NoCompletedSteps {
            skipped: skipped.len(),
        });
    }

    let predicted: Vec<f64> = steps.iter().flat_map(|s| s.predicted.iter().copied()).collect();
    let actual: Vec<f64> = steps.iter().flat_map(|s| s.actual.iter().copied()).collect();
    let period_mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let mer_percent = mean_error_relative(&predicted, &actual, period_mean)?;
    let mae = mean_absolute_error(&predicted, &actual)?;

    Ok(BacktestOutcome {
        report: BacktestReport {
            approx,
            forecast,
            start_fraction,
            approximated_len: n,
            dropped_tail: ap.dropped_tail,
            first_step: first,
            prediction_count: predicted.len(),
            period_mean,
            mer_percent,
            mae,
            steps,
            skipped,
        },
        elapsed_prediction_time: elapsed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mer_percent: f64,
    pub mae: f64,
}

/// One plotting row: the actual value and both methods' forecasts for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub step_index: usize,
    pub offset: usize,
    pub actual: f64,
    pub apst: f64,
    pub persistence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub prediction_count: usize,
    pub period_mean: f64,
    pub apst: MetricSummary,
    pub persistence: MetricSummary,
    pub rows: Vec<ComparisonRow>,
}

/// Scores the persistence baseline on exactly the steps the backtest
/// completed, against the same actuals and period mean.
pub fn compare_with_baseline(series: &PriceSeries, report: &BacktestReport) -> Result<ComparisonReport> {
    let ap = msm::approximate(series, report.approx)?;
    let values = ap.values();
    let mut rows = Vec::with_capacity(report.prediction_count);
    for step in &report.steps {
        let baseline = persistence_baseline(&values[..step.step_index], step.actual.len())?;
        for (offset, ((&actual, &apst), &persistence)) in
            step.actual.iter().zip(&step.predicted).zip(&baseline).enumerate()
        {
            rows.push(ComparisonRow {
                step_index: step.step_index,
                offset,
                actual,
                apst,
                persistence,
            });
        }
    }
    let actual: Vec<f64> = rows.iter().map(|r| r.actual).collect();
    let persistence: Vec<f64> = rows.iter().map(|r| r.persistence).collect();
    Ok(ComparisonReport {
        prediction_count: rows.len(),
        period_mean: report.period_mean,
        apst: MetricSummary {
            mer_percent: report.mer_percent,
            mae: report.mae,
        },
        persistence: MetricSummary {
            mer_percent: mean_error_relative(&persistence, &actual, report.period_mean)?,
            mae: mean_absolute_error(&persistence, &actual)?,
        },
        rows,
    })
}
