//! Percentile aggregation of per-trial metric series.

use serde::{Deserialize, Serialize};

use crate::tabular::MetricPoint;

/// Name of the percentile rule, recorded in run metadata.
pub const PERCENTILE_METHOD: &str = "linear interpolation between order statistics: x[h] with h = (n - 1) p";

/// `p`-quantile (`p ∈ [0, 1]`) of an ascending slice under linear
/// interpolation between order statistics. `None` when empty.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Sorts a copy of `values` (NaN last) and takes its `p`-quantile.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    percentile_sorted(&v, p)
}

pub fn median(values: &[f64]) -> Option<f64> {
    percentile(values, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub step: u64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
}

/// Quartiles across trials at every step that all series share, in step
/// order.
pub fn aggregate(series: &[Vec<MetricPoint>]) -> Vec<AggregateRow> {
    let Some(first) = series.first() else {
        return Vec::new();
    };
    let mut rows = Vec::with_capacity(first.len());
    for (i, p) in first.iter().enumerate() {
        let mut values = Vec::with_capacity(series.len());
        for s in series {
            match s.get(i) {
                Some(q) if q.step == p.step => values.push(q.avg_reward),
                _ => return rows,
            }
        }
        values.sort_by(|a, b| a.total_cmp(b));
        rows.push(AggregateRow {
            step: p.step,
            p25: percentile_sorted(&values, 0.25).unwrap_or(f64::NAN),
            median: percentile_sorted(&values, 0.5).unwrap_or(f64::NAN),
            p75: percentile_sorted(&values, 0.75).unwrap_or(f64::NAN),
        });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> Vec<MetricPoint> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| MetricPoint {
                step: (i as u64 + 1) * 100,
                avg_reward: v,
            })
            .collect()
    }

    #[test]
    fn three_trials() {
        let rows = aggregate(&[series(&[0.0]), series(&[2.0]), series(&[1.0])]);
        assert_eq!(
            rows,
            vec![AggregateRow {
                step: 100,
                p25: 0.5,
                median: 1.0,
                p75: 1.5
            }]
        );
    }

    #[test]
    fn single_trial_is_degenerate() {
        let s = series(&[0.1, 0.4, 0.2]);
        for (row, p) in aggregate(std::slice::from_ref(&s)).iter().zip(&s) {
            assert_eq!((row.p25, row.median, row.p75), (p.avg_reward, p.avg_reward, p.avg_reward));
        }
    }

    #[test]
    fn shared_prefix_only() {
        let rows = aggregate(&[series(&[1.0, 2.0, 3.0]), series(&[1.0, 2.0])]);
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn even_count_median() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(percentile(&[], 0.5), None);
        assert_eq!(percentile(&[1.0, 2.0], 1.0), Some(2.0));
    }
}
