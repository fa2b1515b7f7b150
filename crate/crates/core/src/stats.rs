//! Small Monte Carlo estimators shared by the samplers and experiments.

use serde::{Deserialize, Serialize};

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// `|mean - target| <= k * stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }

    /// Standardized distance to `target`; zero when both the error and the
    /// standard error vanish.
    pub fn z(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// Sample mean with the i.i.d. standard error `sqrt(var / n)`.
pub fn mean_stderr(values: &[f64]) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, stderr: f64::NAN };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Estimate { mean, stderr: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Estimate {
        mean,
        stderr: (var / n as f64).sqrt(),
    }
}

/// Mean of a correlated series with a batch-means standard error.
///
/// The series is cut into `batches` contiguous blocks; the spread of block
/// means gives the error. Falls back to [`mean_stderr`] for short series.
pub fn batch_means(values: &[f64], batches: usize) -> Estimate {
    let n = values.len();
    if batches < 2 || n < 2 * batches {
        return mean_stderr(values);
    }
    let size = n / batches;
    let used = size * batches;
    let means: Vec<f64> = values[..used]
        .chunks(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let block = mean_stderr(&means);
    let mean = values.iter().sum::<f64>() / n as f64;
    // never report less than the i.i.d. error
    let iid = mean_stderr(values).stderr;
    Estimate {
        mean,
        stderr: block.stderr.max(iid),
    }
}

/// Self-normalized weighted mean; `weights` must sum to one.
///
/// Uses the delta-method error `sqrt(Σ w_i² (x_i - mean)²)`.
pub fn weighted_mean_stderr(values: &[f64], weights: &[f64]) -> Estimate {
    let mean: f64 = values.iter().zip(weights).map(|(x, w)| x * w).sum();
    let var: f64 = values
        .iter()
        .zip(weights)
        .map(|(x, w)| w * w * (x - mean) * (x - mean))
        .sum();
    Estimate {
        mean,
        stderr: var.sqrt(),
    }
}

/// Normalizes log-weights with a log-sum-exp shift.
pub fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Kish effective sample size `1 / Σ w²` of normalized weights.
pub fn kish_ess(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Effective sample size of a correlated series, `n · var_iid / var_batch`,
/// capped at `n`. A constant series counts as a single draw.
pub fn series_ess(values: &[f64], batches: usize) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let iid = mean_stderr(values).stderr;
    if iid == 0.0 {
        return n.min(1.0);
    }
    let b = batch_means(values, batches).stderr;
    if b == 0.0 {
        n
    } else {
        (n * (iid / b).powi(2)).min(n)
    }
}
