//! Drives load → approximate → predict/backtest → write for one run.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::config::{Mode, RunConfig};
use crate::eval::{self, EvalError};
use crate::ingest::{self, IngestError};
use crate::knn::{self, ForecastError};
use crate::msm::{self, MsmError};
use crate::report::{self, ApproximationDocument, OutputFormat, PredictionDocument, RunMetadata};

/// A failure, tagged with the stage that produced it.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("load failed: {0}")]
    Load(#[from] IngestError),
    #[error("approximate failed: {0}")]
    Approximate(#[from] MsmError),
    #[error("predict failed: {0}")]
    Predict(#[from] ForecastError),
    #[error("backtest failed: {0}")]
    Backtest(#[from] EvalError),
    #[error("write failed: {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },
}

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mode: Mode,
    pub outputs: Vec<PathBuf>,
    pub message: String,
}

enum Document {
    Approximation(ApproximationDocument),
    Prediction(PredictionDocument),
    Backtest(eval::BacktestReport),
    Comparison(eval::ComparisonReport),
}

impl Document {
    fn write<W: Write>(&self, out: W, format: OutputFormat) -> io::Result<()> {
        match (self, format) {
            (Document::Approximation(d), OutputFormat::Json) => report::write_json(out, d),
            (Document::Approximation(d), OutputFormat::Csv) => report::write_approximation_csv(out, d),
            (Document::Prediction(d), OutputFormat::Json) => report::write_json(out, d),
            (Document::Prediction(d), OutputFormat::Csv) => report::write_prediction_csv(out, d),
            (Document::Backtest(d), OutputFormat::Json) => report::write_json(out, d),
            (Document::Backtest(d), OutputFormat::Csv) => report::write_backtest_csv(out, d),
            (Document::Comparison(d), OutputFormat::Json) => report::write_json(out, d),
            (Document::Comparison(d), OutputFormat::Csv) => report::write_comparison_csv(out, d),
        }
    }
}

/// `<output>.<suffix>` next to the main output file.
pub fn sidecar_path(output: &Path, suffix: &str) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), RunError> {
    let wrap = |source| RunError::Write {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(wrap)?);
    f(&mut out).and_then(|_| out.flush()).map_err(wrap)
}

pub fn run(config: &RunConfig) -> Result<RunSummary, RunError> {
    let loaded = ingest::load_csv(&config.input, &config.schema)?;
    let series = &loaded.series;

    let mut elapsed_ms = None;
    let mut trees_csv = None;
    let (doc, message) = match config.mode {
        Mode::Approximate => {
            let approx = msm::approximate_with_trees(series, config.approx)?;
            let k = config.approx.partition_size;
            let partition_labels = series
                .labels()
                .map(|labels| labels.chunks_exact(k).map(|chunk| chunk[0].clone()).collect());
            let message = format!(
                "approximated {} prices into {} values ({} dropped)",
                series.len(),
                approx.series.len(),
                approx.series.dropped_tail
            );
            let trees = config.emit_trees.then_some(approx.trees);
            if config.format == OutputFormat::Csv {
                trees_csv = trees.clone();
            }
            let doc = ApproximationDocument {
                params: config.approx,
                input_len: series.len(),
                dropped_tail: approx.series.dropped_tail,
                values: approx.series.into_values(),
                partition_labels,
                trees: if config.format == OutputFormat::Json {
                    trees
                } else {
                    None
                },
            };
            (Document::Approximation(doc), message)
        }
        Mode::Predict => {
            let ap = msm::approximate(series, config.approx)?;
            let started = Instant::now();
            let forecast = knn::predict(ap.values(), &config.forecast)?;
            elapsed_ms = Some(started.elapsed().as_secs_f64() * 1e3);
            let message = format!(
                "predicted {:?} from {} neighbours",
                forecast.values,
                forecast.neighbors_used.len()
            );
            let doc = PredictionDocument {
                approx: config.approx,
                forecast_config: config.forecast,
                approximated_len: ap.len(),
                forecast,
            };
            (Document::Prediction(doc), message)
        }
        Mode::Backtest | Mode::Compare => {
            let outcome =
                eval::walk_forward_backtest(series, config.approx, config.forecast, config.start_fraction)?;
            elapsed_ms = Some(outcome.elapsed_prediction_time.as_secs_f64() * 1e3);
            let report = outcome.report;
            if config.mode == Mode::Backtest {
                let message = format!(
                    "backtest: {} predictions, {} skipped, MER {:.4}%, MAE {:.6}",
                    report.prediction_count,
                    report.skipped.len(),
                    report.mer_percent,
                    report.mae
                );
                (Document::Backtest(report), message)
            } else {
                let cmp = eval::compare_with_baseline(series, &report)?;
                let message = format!(
                    "compare: APST MER {:.4}% MAE {:.6} | persistence MER {:.4}% MAE {:.6}",
                    cmp.apst.mer_percent, cmp.apst.mae, cmp.persistence.mer_percent, cmp.persistence.mae
                );
                (Document::Comparison(cmp), message)
            }
        }
    };

    let mut outputs = Vec::new();
    match &config.output {
        Some(path) => {
            write_file(path, |out| doc.write(out, config.format))?;
            outputs.push(path.clone());
            if let Some(trees) = &trees_csv {
                let trees_path = sidecar_path(path, "trees.csv");
                write_file(&trees_path, |out| report::write_trees_csv(out, trees))?;
                outputs.push(trees_path);
            }
            let meta = RunMetadata {
                mode: config.mode.name().to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                generated_at_unix: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs()),
                elapsed_prediction_ms: elapsed_ms,
                bad_rows_skipped: config.schema.skip_bad_rows.then_some(loaded.bad_rows),
            };
            let meta_path = sidecar_path(path, "meta.json");
            write_file(&meta_path, |out| report::write_json(out, &meta))?;
            outputs.push(meta_path);
        }
        None => {
            let stdout = io::stdout();
            let wrap = |source| RunError::Write {
                path: PathBuf::from("<stdout>"),
                source,
            };
            let mut lock = stdout.lock();
            doc.write(&mut lock, config.format).map_err(wrap)?;
            if let Some(trees) = &trees_csv {
                writeln!(lock).map_err(wrap)?;
                report::write_trees_csv(&mut lock, trees).map_err(wrap)?;
            }
        }
    }

    Ok(RunSummary {
        mode: config.mode,
        outputs,
        message,
    })
}
