//! Replicate-mean estimators with batch-means standard errors.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Default number of batches used for standard errors.
pub const DEFAULT_BATCHES: usize = 10;

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0 }
    }

    /// `|value - target| <= k * std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Complex estimate; the standard error is the norm of the componentwise errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub value: Complex64,
    pub std_error: f64,
}

fn batch_bounds(len: usize, batches: usize) -> Vec<(usize, usize)> {
    let b = batches.clamp(1, len.max(1));
    (0..b).map(|i| (i * len / b, (i + 1) * len / b)).collect()
}

fn spread(stats: &[f64]) -> f64 {
    let b = stats.len();
    if b < 2 {
        return f64::NAN;
    }
    let mean = stats.iter().sum::<f64>() / b as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

/// Mean of i.i.d. values, standard error from `batches` contiguous batch means.
pub fn batch_mean(values: &[f64], batches: usize) -> Estimate {
    let n = values.len();
    let value = values.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = batch_bounds(n, batches)
        .into_iter()
        .map(|(lo, hi)| values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64)
        .collect();
    Estimate {
        value,
        std_error: spread(&means),
    }
}

pub fn complex_batch_mean(values: &[Complex64], batches: usize) -> ComplexEstimate {
    let re: Vec<f64> = values.iter().map(|v| v.re).collect();
    let im: Vec<f64> = values.iter().map(|v| v.im).collect();
    let (r, i) = (batch_mean(&re, batches), batch_mean(&im, batches));
    ComplexEstimate {
        value: Complex64::new(r.value, i.value),
        std_error: r.std_error.hypot(i.std_error),
    }
}

/// Applies a (possibly nonlinear) statistic to all items and to each batch;
/// the standard error is the spread of the batch statistics over `sqrt(batches)`.
pub fn batched_statistic<T, F>(items: &[T], batches: usize, stat: F) -> ComplexEstimate
where
    F: Fn(&[T]) -> Complex64,
{
    let value = stat(items);
    let per: Vec<Complex64> = batch_bounds(items.len(), batches)
        .into_iter()
        .map(|(lo, hi)| stat(&items[lo..hi]))
        .collect();
    let re: Vec<f64> = per.iter().map(|v| v.re).collect();
    let im: Vec<f64> = per.iter().map(|v| v.im).collect();
    ComplexEstimate {
        value,
        std_error: spread(&re).hypot(spread(&im)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_mean_of_constant_has_zero_error() {
        let e = batch_mean(&[2.0; 40], 10);
        assert_eq!(e.value, 2.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn batch_mean_matches_hand_computation() {
        let v: Vec<f64> = (0..4).map(f64::from).collect();
        // batches {0,1} and {2,3}: means 0.5, 2.5; sd = sqrt(2); se = 1
        let e = batch_mean(&v, 2);
        assert!((e.value - 1.5).abs() < 1e-15);
        assert!((e.std_error - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fewer_values_than_batches() {
        let e = batch_mean(&[1.0, 3.0], 10);
        assert_eq!(e.value, 2.0);
        assert!((e.std_error - 1.0).abs() < 1e-15);
    }
}
