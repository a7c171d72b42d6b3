//! Output documents and their JSON / CSV encodings.
//!
//! JSON is the canonical format: struct fields serialize in declaration
//! order, so identical inputs give byte-identical files. CSV output is flat
//! and meant for plotting. Anything time-dependent goes into a separate
//! [`RunMetadata`] sidecar.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::eval::{BacktestReport, ComparisonReport};
use crate::knn::{Forecast, ForecastConfig};
use crate::msm::{ApproxParams, MsmTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationDocument {
    pub params: ApproxParams,
    pub input_len: usize,
    pub dropped_tail: usize,
    pub values: Vec<f64>,
    /// Label of the first observation in each partition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trees: Option<Vec<MsmTree>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionDocument {
    pub approx: ApproxParams,
    pub forecast_config: ForecastConfig,
    pub approximated_len: usize,
    pub forecast: Forecast,
}

/// Timing and provenance, excluded from determinism checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub mode: String,
    pub tool_version: String,
    pub generated_at_unix: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_prediction_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bad_rows_skipped: Option<usize>,
}

pub fn write_json<T: Serialize, W: Write>(mut out: W, doc: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, doc)?;
    out.write_all(b"\n")
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(out)
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> io::Result<()> {
    w.flush()
}

fn csv_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// `index,value[,label]` per approximated value.
pub fn write_approximation_csv<W: Write>(out: W, doc: &ApproximationDocument) -> io::Result<()> {
    let mut w = csv_writer(out);
    match &doc.partition_labels {
        Some(labels) => {
            w.write_record(["index", "value", "label"]).map_err(csv_io)?;
            for (i, (v, l)) in doc.values.iter().zip(labels).enumerate() {
                w.write_record([i.to_string(), v.to_string(), l.clone()])
                    .map_err(csv_io)?;
            }
        }
        None => {
            w.write_record(["index", "value"]).map_err(csv_io)?;
            for (i, v) in doc.values.iter().enumerate() {
                w.write_record([i.to_string(), v.to_string()]).map_err(csv_io)?;
            }
        }
    }
    finish(w)
}

/// `partition,level,segment,value` for every tree node.
pub fn write_trees_csv<W: Write>(out: W, trees: &[MsmTree]) -> io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["partition", "level", "segment", "value"])
        .map_err(csv_io)?;
    for tree in trees {
        for (level, means) in tree.levels().iter().enumerate() {
            for (segment, v) in means.iter().enumerate() {
                w.write_record([
                    tree.partition_index.to_string(),
                    level.to_string(),
                    segment.to_string(),
                    v.to_string(),
                ])
                .map_err(csv_io)?;
            }
        }
    }
    finish(w)
}

pub fn write_prediction_csv<W: Write>(out: W, doc: &PredictionDocument) -> io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["offset", "predicted"]).map_err(csv_io)?;
    for (j, v) in doc.forecast.values.iter().enumerate() {
        w.write_record([j.to_string(), v.to_string()]).map_err(csv_io)?;
    }
    finish(w)
}

/// `step,offset,predicted,actual,abs_error` per predicted value.
pub fn write_backtest_csv<W: Write>(out: W, report: &BacktestReport) -> io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["step", "offset", "predicted", "actual", "abs_error"])
        .map_err(csv_io)?;
    for step in &report.steps {
        for (j, ((p, a), e)) in step
            .predicted
            .iter()
            .zip(&step.actual)
            .zip(&step.absolute_errors)
            .enumerate()
        {
            w.write_record([
                step.step_index.to_string(),
                j.to_string(),
                p.to_string(),
                a.to_string(),
                e.to_string(),
            ])
            .map_err(csv_io)?;
        }
    }
    finish(w)
}

pub fn write_comparison_csv<W: Write>(out: W, report: &ComparisonReport) -> io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record([
        "step",
        "offset",
        "actual",
        "apst",
        "persistence",
        "apst_abs_error",
        "persistence_abs_error",
    ])
    .map_err(csv_io)?;
    for r in &report.rows {
        w.write_record([
            r.step_index.to_string(),
            r.offset.to_string(),
            r.actual.to_string(),
            r.apst.to_string(),
            r.persistence.to_string(),
            (r.apst - r.actual).abs().to_string(),
            (r.persistence - r.actual).abs().to_string(),
        ])
        .map_err(csv_io)?;
    }
    finish(w)
}
