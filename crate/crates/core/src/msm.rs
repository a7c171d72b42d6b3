//! Multilevel segment-mean (MSM) approximation.
//!
//! A price series is cut into equal partitions of `K` consecutive values.
//! Each partition is reduced to a t-ary tree of means: the deepest stored
//! level averages runs of `t` raw prices, every level above it averages `t`
//! adjacent children, and the root (level 0) is the partition's
//! representative value. The ordered roots form the approximated series that
//! the forecaster searches.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while validating inputs or building approximations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MsmError {
    #[error("ZeroSize: partition size and segment size must both be at least 1 (got K={partition_size}, t={segment_size})")]
    ZeroSize {
        partition_size: usize,
        segment_size: usize,
    },
    #[error("NotPowerOfSegmentSize: partition size {partition_size} is not an integer power of segment size {segment_size}")]
    NotPowerOfSegmentSize {
        partition_size: usize,
        segment_size: usize,
    },
    #[error("EmptySeries: series of length {len} holds no complete partition of size {partition_size}")]
    EmptySeries { len: usize, partition_size: usize },
    #[error("LengthMismatch: partition has {actual} values, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("NonFiniteValue: value at index {index} is not finite ({value})")]
    NonFiniteValue { index: usize, value: f64 },
    #[error("LabelCountMismatch: {labels} labels for {values} values")]
    LabelCountMismatch { values: usize, labels: usize },
}

pub type Result<T, E = MsmError> = std::result::Result<T, E>;

/// Ordered closing prices, optionally labelled with dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl PriceSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values)?;
        Ok(Self { values, labels: None })
    }

    pub fn with_labels(values: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        check_finite(&values)?;
        if labels.len() != values.len() {
            return Err(MsmError::LabelCountMismatch {
                values: values.len(),
                labels: labels.len(),
            });
        }
        Ok(Self {
            values,
            labels: Some(labels),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// First `len` observations, labels included.
    pub fn truncated(&self, len: usize) -> Self {
        let len = len.min(self.values.len());
        Self {
            values: self.values[..len].to_vec(),
            labels: self.labels.as_ref().map(|l| l[..len].to_vec()),
        }
    }

    /// Applies `f` to every value. Fails if the result is not finite.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        check_finite(&values)?;
        Ok(Self {
            values,
            labels: self.labels.clone(),
        })
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(MsmError::NonFiniteValue {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// Partition size `K` and segment size `t`, with `K = t^l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproxParams {
    pub partition_size: usize,
    pub segment_size: usize,
}

impl ApproxParams {
    pub fn new(partition_size: usize, segment_size: usize) -> Self {
        Self {
            partition_size,
            segment_size,
        }
    }

    /// Returns the level count `l` such that `t^l == K`.
    pub fn validate(&self) -> Result<u32> {
        validate_params(*self)
    }
}

impl Default for ApproxParams {
    fn default() -> Self {
        Self::new(27, 3)
    }
}

/// Returns the exact integer `l` with `t^l = K`.
///
/// `K = 1` is accepted for any `t` (l = 0), which makes the approximation an
/// identity map. `t = 1` therefore only admits `K = 1`.
pub fn validate_params(params: ApproxParams) -> Result<u32> {
    let ApproxParams {
        partition_size,
        segment_size,
    } = params;
    if partition_size == 0 || segment_size == 0 {
        return Err(MsmError::ZeroSize {
            partition_size,
            segment_size,
        });
    }
    let not_power = MsmError::NotPowerOfSegmentSize {
        partition_size,
        segment_size,
    };
    let mut levels = 0u32;
    let mut remaining = partition_size;
    while remaining > 1 {
        if segment_size == 1 || remaining % segment_size != 0 {
            return Err(not_power);
        }
        remaining /= segment_size;
        levels += 1;
    }
    Ok(levels)
}

/// Splits `values` into `floor(N / K)` contiguous chunks of `K` elements.
///
/// Returns the chunks and the number of trailing elements left over.
pub fn partition(values: &[f64], partition_size: usize) -> Result<(Vec<&[f64]>, usize)> {
    if partition_size == 0 {
        return Err(MsmError::ZeroSize {
            partition_size,
            segment_size: 0,
        });
    }
    if values.len() < partition_size {
        return Err(MsmError::EmptySeries {
            len: values.len(),
            partition_size,
        });
    }
    let chunks = values.chunks_exact(partition_size);
    let dropped = chunks.remainder().len();
    Ok((chunks.collect(), dropped))
}

/// Segment-mean hierarchy for one partition.
///
/// `levels[j]` holds the `t^j` means of level `j`; `levels[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsmTree {
    pub partition_index: usize,
    levels: Vec<Vec<f64>>,
}

impl MsmTree {
    /// Level `j`, or `None` past the deepest stored level.
    pub fn level(&self, j: usize) -> Option<&[f64]> {
        self.levels.get(j).map(Vec::as_slice)
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn root(&self) -> f64 {
        self.levels[0][0]
    }
}

/// Builds the mean tree for one partition of exactly `K` prices.
pub fn build_tree(partition: &[f64], params: ApproxParams) -> Result<MsmTree> {
    let levels = validate_params(params)?;
    let mut ops = 0u64;
    build_tree_counted(partition, params, levels, 1, &mut ops)
}

fn build_tree_counted(
    partition: &[f64],
    params: ApproxParams,
    level_count: u32,
    partition_index: usize,
    ops: &mut u64,
) -> Result<MsmTree> {
    if partition.len() != params.partition_size {
        return Err(MsmError::LengthMismatch {
            expected: params.partition_size,
            actual: partition.len(),
        });
    }
    check_finite(partition)?;

    let t = params.segment_size;
    // Identity tree: the lone raw value is its own root.
    if level_count == 0 {
        *ops += 1;
        return Ok(MsmTree {
            partition_index,
            levels: vec![partition.to_vec()],
        });
    }

    let depth = level_count as usize;
    let mut levels = vec![Vec::new(); depth];
    let mut current = segment_means(partition, t, ops);
    for j in (0..depth).rev() {
        let next = if j > 0 {
            segment_means(&current, t, ops)
        } else {
            Vec::new()
        };
        levels[j] = std::mem::replace(&mut current, next);
    }
    Ok(MsmTree {
        partition_index,
        levels,
    })
}

fn segment_means(values: &[f64], t: usize, ops: &mut u64) -> Vec<f64> {
    values
        .chunks_exact(t)
        .map(|segment| {
            *ops += segment.len() as u64;
            bounded_mean(segment)
        })
        .collect()
}

/// Compensated (Neumaier) sum divided by the count, clamped to the
/// segment's range so that rounding never escapes `[min, max]`.
pub(crate) fn bounded_mean(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    ((sum + compensation) / values.len() as f64).clamp(lo, hi)
}

/// Level-0 approximation of a whole series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxSeries {
    values: Vec<f64>,
    pub params: ApproxParams,
    pub dropped_tail: usize,
}

impl ApproxSeries {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl AsRef<[f64]> for ApproxSeries {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Approximation together with its per-partition trees and an arithmetic
/// operation count (one per element summed).
#[derive(Debug, Clone)]
pub struct Approximation {
    pub series: ApproxSeries,
    pub trees: Vec<MsmTree>,
    pub operations: u64,
}

/// Reduces `series` to one level-0 mean per complete partition.
pub fn approximate(series: &PriceSeries, params: ApproxParams) -> Result<ApproxSeries> {
    approximate_with_trees(series, params).map(|a| a.series)
}

/// Like [`approximate`], retaining every tree and the operation count.
pub fn approximate_with_trees(series: &PriceSeries, params: ApproxParams) -> Result<Approximation> {
    let level_count = validate_params(params)?;
    let (chunks, dropped_tail) = partition(series.values(), params.partition_size)?;
    let mut operations = 0u64;
    let trees = chunks
        .iter()
        .enumerate()
        .map(|(i, chunk)| build_tree_counted(chunk, params, level_count, i + 1, &mut operations))
        .collect::<Result<Vec<_>>>()?;
    let values = trees.iter().map(MsmTree::root).collect();
    Ok(Approximation {
        series: ApproxSeries {
            values,
            params,
            dropped_tail,
        },
        trees,
        operations,
    })
}
