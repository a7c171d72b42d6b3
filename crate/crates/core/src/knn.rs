//! Nearest-neighbour pattern forecasting over an approximated series.
//!
//! The trailing `w` values form the query pattern. Every earlier window of
//! the same length that does not overlap the query and still has `m`
//! successors is a candidate; the `k` closest by Euclidean distance (after
//! the optional distance threshold) vote on the next `m` values by
//! position-wise averaging.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForecastError {
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("LengthMismatch: windows of length {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("SeriesTooShort: series has {len} values, window needs {window}")]
    SeriesTooShort { len: usize, window: usize },
    #[error("NoCandidates: no window of length {window} with {horizon} successors fits before the query in {len} values")]
    NoCandidates {
        len: usize,
        window: usize,
        horizon: usize,
    },
    #[error("NoNeighborsWithinThreshold: all {candidates} candidates are farther than {threshold}")]
    NoNeighborsWithinThreshold { candidates: usize, threshold: f64 },
}

pub type Result<T, E = ForecastError> = std::result::Result<T, E>;

/// Window `w`, neighbour count `k`, horizon `m` and optional threshold `ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub window: usize,
    pub neighbors: usize,
    pub horizon: usize,
    #[serde(default)]
    pub threshold: Option<f64>,
}

impl ForecastConfig {
    pub fn new(window: usize, neighbors: usize, horizon: usize) -> Self {
        Self {
            window,
            neighbors,
            horizon,
            threshold: None,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("window", self.window),
            ("neighbors", self.neighbors),
            ("horizon", self.horizon),
        ] {
            if value == 0 {
                return Err(ForecastError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if let Some(psi) = self.threshold {
            if !psi.is_finite() || psi < 0.0 {
                return Err(ForecastError::InvalidConfig(format!(
                    "threshold must be finite and non-negative, got {psi}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self::new(3, 2, 1)
    }
}

/// A matched historical window and the values that followed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub start_index: usize,
    pub distance: f64,
    pub successors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub values: Vec<f64>,
    pub neighbors_used: Vec<Neighbor>,
    pub query_window: Vec<f64>,
}

/// Arithmetic performed by one prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PredictionCost {
    /// Squared-difference terms accumulated during the candidate scan.
    pub scan_ops: u64,
    /// Successor values summed while averaging.
    pub averaging_ops: u64,
}

/// Plain L2 distance between two equal-length windows.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(ForecastError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        sum += d * d;
    }
    Ok(sum.sqrt())
}

/// The last `w` values of `ap`, oldest first.
pub fn extract_pattern(ap: &[f64], window: usize) -> Result<&[f64]> {
    if window == 0 {
        return Err(ForecastError::InvalidConfig("window must be at least 1".into()));
    }
    if ap.len() < window {
        return Err(ForecastError::SeriesTooShort {
            len: ap.len(),
            window,
        });
    }
    Ok(&ap[ap.len() - window..])
}

/// Number of eligible start indices: `s + w <= n - w` and `s + w + m <= n`.
pub(crate) fn candidate_count(len: usize, window: usize, horizon: usize) -> usize {
    let reach = window + window.max(horizon);
    (len + 1).saturating_sub(reach)
}

#[derive(Debug, Clone, Copy)]
struct Ranked {
    distance: f64,
    start: usize,
}

impl Ranked {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.start.cmp(&other.start))
    }
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

/// Finds the `k` windows of `ap` closest to `pattern`.
///
/// Results are ordered by distance, ties by ascending start index.
pub fn find_neighbors(ap: &[f64], pattern: &[f64], config: &ForecastConfig) -> Result<Vec<Neighbor>> {
    let mut ops = 0;
    find_neighbors_counted(ap, pattern, config, &mut ops)
}

fn find_neighbors_counted(
    ap: &[f64],
    pattern: &[f64],
    config: &ForecastConfig,
    ops: &mut u64,
) -> Result<Vec<Neighbor>> {
    config.validate()?;
    let w = config.window;
    let m = config.horizon;
    if pattern.len() != w {
        return Err(ForecastError::LengthMismatch {
            left: pattern.len(),
            right: w,
        });
    }
    let candidates = candidate_count(ap.len(), w, m);
    if candidates == 0 {
        return Err(ForecastError::NoCandidates {
            len: ap.len(),
            window: w,
            horizon: m,
        });
    }

    let k = config.neighbors;
    // Max-heap: the top is the worst of the current best `k`.
    let mut best: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k.min(candidates) + 1);
    let mut survivors = 0usize;
    for start in 0..candidates {
        let cutoff = match (best.len() == k, config.threshold) {
            (true, Some(psi)) => Some(best.peek().unwrap().distance.min(psi)),
            (true, None) => Some(best.peek().unwrap().distance),
            (false, psi) => psi,
        };
        let cutoff_sq = cutoff.map(|c| c * c);

        let window = &ap[start..start + w];
        let mut sum = 0.0;
        let mut abandoned = false;
        for (x, y) in window.iter().zip(pattern) {
            let d = x - y;
            sum += d * d;
            *ops += 1;
            // Partial sums only grow, so once the root passes the cutoff the
            // candidate can neither survive the threshold nor enter the top k.
            if let (Some(c), Some(c_sq)) = (cutoff, cutoff_sq) {
                if sum > c_sq && sum.sqrt() > c {
                    abandoned = true;
                    break;
                }
            }
        }
        if abandoned {
            continue;
        }
        let distance = sum.sqrt();
        if config.threshold.is_some_and(|psi| distance > psi) {
            continue;
        }
        survivors += 1;
        let entry = Ranked { distance, start };
        if best.len() < k {
            best.push(entry);
        } else if entry < *best.peek().unwrap() {
            best.pop();
            best.push(entry);
        }
    }

    if survivors == 0 {
        return Err(ForecastError::NoNeighborsWithinThreshold {
            candidates,
            threshold: config.threshold.unwrap_or(f64::INFINITY),
        });
    }

    Ok(best
        .into_sorted_vec()
        .into_iter()
        .map(|r| Neighbor {
            start_index: r.start,
            distance: r.distance,
            successors: ap[r.start + w..r.start + w + m].to_vec(),
        })
        .collect())
}

/// Forecasts the `m` values following `ap`.
///
/// Each value is the mean of the neighbours' successors at that position,
/// divided by the number of neighbours actually found.
pub fn predict(ap: &[f64], config: &ForecastConfig) -> Result<Forecast> {
    predict_with_cost(ap, config).map(|(f, _)| f)
}

pub fn predict_with_cost(ap: &[f64], config: &ForecastConfig) -> Result<(Forecast, PredictionCost)> {
    config.validate()?;
    let pattern = extract_pattern(ap, config.window)?;
    let mut cost = PredictionCost::default();
    let neighbors = find_neighbors_counted(ap, pattern, config, &mut cost.scan_ops)?;
    let values = average_successors(&neighbors, config.horizon, &mut cost.averaging_ops);
    Ok((
        Forecast {
            values,
            neighbors_used: neighbors,
            query_window: pattern.to_vec(),
        },
        cost,
    ))
}

fn average_successors(neighbors: &[Neighbor], horizon: usize, ops: &mut u64) -> Vec<f64> {
    let count = neighbors.len() as f64;
    (0..horizon)
        .map(|j| {
            let mut sum = 0.0;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for n in neighbors {
                let e = n.successors[j];
                sum += e;
                lo = lo.min(e);
                hi = hi.max(e);
                *ops += 1;
            }
            (sum / count).clamp(lo, hi)
        })
        .collect()
}

pub mod oracle {
    //! Exhaustive reference search used to check [`super::find_neighbors`].

    use super::{ForecastConfig, ForecastError, Neighbor, Result};

    /// Enumerates every start index, keeps the eligible ones, computes each
    /// distance naively and sorts by `(distance, start_index)`.
    pub fn brute_force_knn_oracle(
        ap: &[f64],
        pattern: &[f64],
        config: &ForecastConfig,
    ) -> Result<Vec<Neighbor>> {
        config.validate()?;
        let (w, m, n) = (config.window, config.horizon, ap.len());
        if pattern.len() != w {
            return Err(ForecastError::LengthMismatch {
                left: pattern.len(),
                right: w,
            });
        }
        let eligible: Vec<usize> = (0..n).filter(|&s| s + w + m <= n && s + w + w <= n).collect();
        if eligible.is_empty() {
            return Err(ForecastError::NoCandidates {
                len: n,
                window: w,
                horizon: m,
            });
        }
        let mut scored: Vec<(f64, usize)> = eligible
            .iter()
            .map(|&s| {
                let d = ap[s..s + w]
                    .iter()
                    .zip(pattern)
                    .map(|(a, b)| (a - b) * (a - b))
                    .fold(0.0, |acc, x| acc + x)
                    .sqrt();
                (d, s)
            })
            .filter(|(d, _)| config.threshold.is_none_or(|psi| *d <= psi))
            .collect();
        if scored.is_empty() {
            return Err(ForecastError::NoNeighborsWithinThreshold {
                candidates: eligible.len(),
                threshold: config.threshold.unwrap_or(f64::INFINITY),
            });
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(scored
            .into_iter()
            .take(config.neighbors)
            .map(|(distance, s)| Neighbor {
                start_index: s,
                distance,
                successors: ap[s + w..s + w + m].to_vec(),
            })
            .collect())
    }
}

pub use oracle::brute_force_knn_oracle;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        assert_eq!(euclidean_distance(&[1.0, 2.0], &[1.0, 2.0]), Ok(0.0));
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]), Ok(5.0));
        let d = euclidean_distance(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(d, 14f64.sqrt());
        assert!((d - 3.7417).abs() < 1e-4);
        assert!(matches!(
            euclidean_distance(&[1.0], &[1.0, 2.0]),
            Err(ForecastError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn pattern_examples() {
        assert_eq!(extract_pattern(&[1., 2., 3., 4., 5.], 2), Ok(&[4.0, 5.0][..]));
        assert_eq!(extract_pattern(&[7.0], 1), Ok(&[7.0][..]));
        assert_eq!(
            extract_pattern(&[1.0, 2.0], 3),
            Err(ForecastError::SeriesTooShort { len: 2, window: 3 })
        );
    }

    #[test]
    fn candidate_bounds() {
        assert_eq!(candidate_count(8, 2, 1), 5);
        assert_eq!(candidate_count(4, 2, 1), 1);
        assert_eq!(candidate_count(3, 2, 1), 0);
        assert_eq!(candidate_count(5, 1, 3), 2);
        assert_eq!(candidate_count(0, 1, 1), 0);
    }

    #[test]
    fn repeated_cycle_neighbors() {
        let ap = [1., 2., 3., 1., 2., 3., 1., 2.];
        let cfg = ForecastConfig::new(2, 2, 1);
        let got = find_neighbors(&ap, &[1.0, 2.0], &cfg).unwrap();
        let want = vec![
            Neighbor {
                start_index: 0,
                distance: 0.0,
                successors: vec![3.0],
            },
            Neighbor {
                start_index: 3,
                distance: 0.0,
                successors: vec![3.0],
            },
        ];
        assert_eq!(got, want);
        assert_eq!(brute_force_knn_oracle(&ap, &[1.0, 2.0], &cfg).unwrap(), want);
        assert_eq!(predict(&ap, &cfg).unwrap().values, vec![3.0]);
    }

    #[test]
    fn ties_prefer_oldest_window() {
        let ap = [5.0; 5];
        let got = find_neighbors(&ap, &[5.0], &ForecastConfig::new(1, 1, 1)).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].start_index, 0);
        assert_eq!(got[0].distance, 0.0);
    }

    #[test]
    fn threshold_can_reject_everything() {
        // History windows shifted by +1 from the query pattern.
        let ap = [2., 3., 4., 2., 3., 4., 1., 2.];
        let cfg = ForecastConfig::new(2, 2, 1).with_threshold(0.5);
        let pattern = extract_pattern(&ap, 2).unwrap();
        assert!(matches!(
            find_neighbors(&ap, pattern, &cfg),
            Err(ForecastError::NoNeighborsWithinThreshold { candidates: 5, .. })
        ));
        assert!(matches!(
            brute_force_knn_oracle(&ap, pattern, &cfg),
            Err(ForecastError::NoNeighborsWithinThreshold { candidates: 5, .. })
        ));
        // Loosening the threshold admits the two sqrt(2) matches only.
        let cfg = cfg.with_threshold(1.5);
        let got = find_neighbors(&ap, pattern, &cfg).unwrap();
        assert_eq!(got.iter().map(|n| n.start_index).collect::<Vec<_>>(), vec![0, 3]);
    }

    #[test]
    fn no_candidates() {
        let cfg = ForecastConfig::new(2, 1, 1);
        assert!(matches!(
            find_neighbors(&[1.0, 2.0, 3.0], &[2.0, 3.0], &cfg),
            Err(ForecastError::NoCandidates { .. })
        ));
        assert!(matches!(
            brute_force_knn_oracle(&[1.0, 2.0, 3.0], &[2.0, 3.0], &cfg),
            Err(ForecastError::NoCandidates { .. })
        ));
        assert!(matches!(
            predict(&[1.0, 2.0, 3.0], &cfg),
            Err(ForecastError::NoCandidates { .. })
        ));
    }

    #[test]
    fn two_histories_average() {
        let ap = [1., 2., 4., 1., 2., 6., 1., 2.];
        let f = predict(&ap, &ForecastConfig::new(2, 2, 1)).unwrap();
        assert_eq!(f.values, vec![5.0]);
        assert_eq!(f.query_window, vec![1.0, 2.0]);
    }

    #[test]
    fn fewer_survivors_than_k_divides_by_survivors() {
        let ap = [1., 2., 4., 9., 9., 6., 1., 2.];
        let cfg = ForecastConfig::new(2, 3, 1).with_threshold(0.0);
        let f = predict(&ap, &cfg).unwrap();
        assert_eq!(f.neighbors_used.len(), 1);
        assert_eq!(f.values, vec![4.0]);
    }

    #[test]
    fn constant_series_predicts_constant() {
        let c = 0.1 + 0.7;
        let ap = vec![c; 30];
        let f = predict(&ap, &ForecastConfig::new(4, 3, 5)).unwrap();
        assert_eq!(f.values, vec![c; 5]);
    }

    #[test]
    fn config_validation() {
        assert!(ForecastConfig::new(0, 1, 1).validate().is_err());
        assert!(ForecastConfig::new(1, 0, 1).validate().is_err());
        assert!(ForecastConfig::new(1, 1, 0).validate().is_err());
        assert!(ForecastConfig::new(1, 1, 1)
            .with_threshold(-1.0)
            .validate()
            .is_err());
        assert!(ForecastConfig::new(1, 1, 1)
            .with_threshold(f64::NAN)
            .validate()
            .is_err());
        assert!(ForecastConfig::new(1, 1, 1)
            .with_threshold(0.0)
            .validate()
            .is_ok());
    }

    #[test]
    fn averaging_cost_is_m_times_neighbors() {
        let ap: Vec<f64> = (0..60).map(|i| ((i * 7) % 11) as f64).collect();
        for (k, m) in [(1, 1), (2, 3), (4, 2), (5, 5)] {
            let (f, cost) = predict_with_cost(&ap, &ForecastConfig::new(3, k, m)).unwrap();
            assert_eq!(cost.averaging_ops, (m * f.neighbors_used.len()) as u64);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn config() -> impl Strategy<Value = ForecastConfig> {
            (1usize..6, 1usize..6, 1usize..4, prop::option::of(0.0f64..30.0)).prop_map(|(w, k, m, psi)| {
                ForecastConfig {
                    window: w,
                    neighbors: k,
                    horizon: m,
                    threshold: psi,
                }
            })
        }

        proptest! {
            #[test]
            fn matches_oracle(
                ap in prop::collection::vec((0u8..6).prop_map(f64::from), 10..80),
                cfg in config(),
            ) {
                let pattern = &ap[ap.len() - cfg.window..];
                prop_assert_eq!(
                    find_neighbors(&ap, pattern, &cfg),
                    brute_force_knn_oracle(&ap, pattern, &cfg)
                );
            }

            #[test]
            fn forecast_within_successor_range(
                ap in prop::collection::vec(0.0f64..100.0, 12..120),
                cfg in config(),
            ) {
                if let Ok(f) = predict(&ap, &ForecastConfig { threshold: None, ..cfg }) {
                    prop_assert!(!f.neighbors_used.is_empty());
                    prop_assert!(f.neighbors_used.len() <= cfg.neighbors);
                    for j in 0..cfg.horizon {
                        let col: Vec<f64> = f.neighbors_used.iter().map(|n| n.successors[j]).collect();
                        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let mean = col.iter().sum::<f64>() / col.len() as f64;
                        prop_assert!(lo <= f.values[j] && f.values[j] <= hi);
                        prop_assert!((f.values[j] - mean).abs() <= 1e-9 * mean.abs().max(1.0));
                    }
                }
            }

            #[test]
            fn exact_copy_is_recalled(
                prefix in prop::collection::vec(0.0f64..100.0, 0..20),
                pattern in prop::collection::vec(0.0f64..100.0, 1..5),
                tail in prop::collection::vec(0.0f64..100.0, 1..4),
                gap in prop::collection::vec(0.0f64..100.0, 0..10),
                k in 1usize..4,
            ) {
                let mut ap = prefix.clone();
                ap.extend(&pattern);
                ap.extend(&tail);
                ap.extend(&gap);
                ap.extend(&pattern);
                let cfg = ForecastConfig::new(pattern.len(), k, tail.len()).with_threshold(0.0);
                let found = find_neighbors(&ap, &pattern, &cfg).unwrap();
                prop_assert!(found.iter().any(|n| n.start_index == prefix.len()));
            }
        }
    }
}
