//! Small statistics helpers for Monte-Carlo reports.

use serde::Serialize;

use crate::scalar::Scalar;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn exact(value: f64) -> Self {
        Self { mean: value, stderr: 0.0, n: 1 }
    }

    pub fn from_samples<S: Scalar>(samples: &[S]) -> Self {
        let v: Vec<f64> = samples.iter().map(|s| s.as_f64()).collect();
        let n = v.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, n };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, n }
    }

    /// Standard error of a difference of independent estimates.
    pub fn combined_stderr(&self, other: &Self) -> f64 {
        self.stderr.hypot(other.stderr)
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}
