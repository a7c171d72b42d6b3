//! CSV price loading.

use std::fmt;
use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::msm::PriceSeries;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("FileNotFound: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("Io: {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("ParseError: row {row}, column {column}: cannot read {content:?} as a finite price")]
    ParseError {
        row: usize,
        column: String,
        content: String,
    },
    #[error("MissingColumn: no column named {0:?} in header")]
    MissingColumn(String),
    #[error("Csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("EmptyFile: no price rows were read")]
    EmptyFile,
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

/// A column addressed by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl FromStr for ColumnRef {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.trim().to_string()),
        })
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Index(i) => write!(f, "{i}"),
            ColumnRef::Name(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub date_column: Option<ColumnRef>,
    /// `None` selects the last column of each row.
    pub price_column: Option<ColumnRef>,
    pub has_header: bool,
    pub delimiter: u8,
    pub skip_bad_rows: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            date_column: None,
            price_column: None,
            has_header: true,
            delimiter: b',',
            skip_bad_rows: false,
        }
    }
}

/// Series read from a file plus the number of rows that were skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSeries {
    pub series: PriceSeries,
    pub bad_rows: usize,
}

enum Resolved {
    At(usize),
    Last,
}

fn resolve(column: &ColumnRef, headers: Option<&csv::StringRecord>) -> Result<usize> {
    match column {
        ColumnRef::Index(i) => Ok(*i),
        ColumnRef::Name(name) => headers
            .and_then(|h| h.iter().position(|c| c.trim() == name))
            .ok_or_else(|| IngestError::MissingColumn(name.clone())),
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadedSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => IngestError::FileNotFound(path.to_path_buf()),
        _ => IngestError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    read_csv(file, schema)
}

/// Reads prices in file order from any reader.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<LoadedSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .delimiter(schema.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = if schema.has_header {
        Some(rdr.headers()?.clone())
    } else {
        None
    };
    let price = match &schema.price_column {
        Some(c) => Resolved::At(resolve(c, headers.as_ref())?),
        None => Resolved::Last,
    };
    let date = schema
        .date_column
        .as_ref()
        .map(|c| resolve(c, headers.as_ref()))
        .transpose()?;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut bad_rows = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // 1-based file line, counting the header.
        let row = i + 1 + usize::from(schema.has_header);
        let idx = match price {
            Resolved::At(c) => c,
            Resolved::Last => record.len().saturating_sub(1),
        };
        let content = record.get(idx).unwrap_or("");
        let parsed = content.parse::<f64>().ok().filter(|v| v.is_finite());
        let label = date.map(|d| record.get(d).unwrap_or("").to_string());
        match parsed {
            Some(v) => {
                values.push(v);
                labels.extend(label);
            }
            None if schema.skip_bad_rows => bad_rows += 1,
            None => {
                return Err(IngestError::ParseError {
                    row,
                    column: schema
                        .price_column
                        .as_ref()
                        .map_or_else(|| idx.to_string(), ToString::to_string),
                    content: content.to_string(),
                })
            }
        }
    }
    if values.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    let series = if date.is_some() {
        PriceSeries::with_labels(values, labels)
    } else {
        PriceSeries::new(values)
    }
    .expect("parsed values are finite and labels are paired");
    Ok(LoadedSeries { series, bad_rows })
}
