//! Tumbling-window aggregation of per-frame load predictions.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AggregateError {
    #[error("prediction {0} is not finite")]
    NonFinitePrediction(f64),
    #[error("no values to aggregate")]
    EmptyInput,
    #[error("quantile bounds must satisfy 0 <= low < high <= 1, got ({0}, {1})")]
    InvalidBounds(f64, f64),
}

fn check_bounds(q_low: f64, q_high: f64) -> Result<(), AggregateError> {
    if (0.0..1.0).contains(&q_low) && q_high > q_low && q_high <= 1.0 {
        Ok(())
    } else {
        Err(AggregateError::InvalidBounds(q_low, q_high))
    }
}

/// Empirical quantile of sorted data with linear interpolation between
/// order statistics at position `(n - 1) q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let (a, b) = (sorted[lo], sorted[hi]);
    if a == b {
        a
    } else {
        a + (h - lo as f64) * (b - a)
    }
}

/// Mean of the values lying inside the interpolated `[q_low, q_high]`
/// quantile range (bounds inclusive).
///
/// If no value falls inside (possible for narrow bounds on sparse data) the
/// midpoint of the two quantiles is returned.
pub fn trimmed_mean(values: &[f64], q_low: f64, q_high: f64) -> Result<f64, AggregateError> {
    check_bounds(q_low, q_high)?;
    if values.is_empty() {
        return Err(AggregateError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&sorted, q_low);
    let hi = quantile_sorted(&sorted, q_high);
    let (sum, count) = sorted
        .iter()
        .filter(|&&v| v >= lo && v <= hi)
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if count == 0 {
        return Ok(0.5 * (lo + hi));
    }
    Ok(sum / count as f64)
}

/// Window summary emitted alongside each estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    /// Minimum and maximum before trimming.
    pub min: f64,
    pub max: f64,
    pub kept: usize,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub load_kg: f64,
    pub stats: WindowStats,
}

/// Collects predictions and emits one trimmed mean per full buffer.
#[derive(Debug, Clone)]
pub struct Aggregator {
    capacity: usize,
    q_low: f64,
    q_high: f64,
    buffer: Vec<f64>,
}

impl Aggregator {
    pub fn new(capacity: usize, q_low: f64, q_high: f64) -> Result<Self, AggregateError> {
        check_bounds(q_low, q_high)?;
        if capacity == 0 {
            return Err(AggregateError::EmptyInput);
        }
        Ok(Self {
            capacity,
            q_low,
            q_high,
            buffer: Vec::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn pending(&self) -> usize {
        self.buffer.len()
    }

    pub fn push(&mut self, pred_kg: f64) -> Result<Option<f64>, AggregateError> {
        Ok(self.push_with_stats(pred_kg)?.map(|e| e.load_kg))
    }

    pub fn push_with_stats(&mut self, pred_kg: f64) -> Result<Option<Estimate>, AggregateError> {
        if !pred_kg.is_finite() {
            return Err(AggregateError::NonFinitePrediction(pred_kg));
        }
        self.buffer.push(pred_kg);
        if self.buffer.len() < self.capacity {
            return Ok(None);
        }
        let load_kg = trimmed_mean(&self.buffer, self.q_low, self.q_high)?;
        let mut sorted = self.buffer.clone();
        sorted.sort_by(f64::total_cmp);
        let lo = quantile_sorted(&sorted, self.q_low);
        let hi = quantile_sorted(&sorted, self.q_high);
        let stats = WindowStats {
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            kept: sorted.iter().filter(|&&v| v >= lo && v <= hi).count(),
            count: sorted.len(),
        };
        self.buffer.clear();
        Ok(Some(Estimate { load_kg, stats }))
    }

    /// Drops any partial window.
    pub fn reset(&mut self) {
        self.buffer.clear();
    }
}
