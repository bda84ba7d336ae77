//! Medians and bootstrap error bars.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default number of bootstrap resamples.
pub const DEFAULT_RESAMPLES: usize = 1000;

const BOOTSTRAP_STREAM: u64 = 2;

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInstance("NaN in statistics input".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample median; the mean of the two central values for even counts.
pub fn median(values: &[f64]) -> Result<f64> {
    Ok(median_of_sorted(&sorted(values)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BootstrapEstimate {
    pub mean_of_medians: f64,
    pub std_of_medians: f64,
    pub resamples: usize,
    pub sample_size: usize,
}

impl BootstrapEstimate {
    /// Two standard deviations of the resampled medians.
    pub fn error_bar(&self) -> f64 {
        2.0 * self.std_of_medians
    }
}

/// Mean and sample standard deviation of the medians of `resamples`
/// resamples drawn with replacement. Resampling indices do not depend on the
/// input order.
pub fn bootstrap_median(values: &[f64], resamples: usize, seed: u64) -> Result<BootstrapEstimate> {
    if resamples == 0 {
        return Err(Error::InvalidInstance("need at least one resample".into()));
    }
    let data = sorted(values)?;
    let n = data.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BOOTSTRAP_STREAM);
    let mut sample = vec![0.0; n];
    let medians: Vec<f64> = (0..resamples)
        .map(|_| {
            for x in sample.iter_mut() {
                *x = data[rng.gen_range(0..n)];
            }
            sample.sort_by(f64::total_cmp);
            median_of_sorted(&sample)
        })
        .collect();
    let mean = medians.iter().sum::<f64>() / resamples as f64;
    let var = if resamples > 1 {
        medians.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64
    } else {
        0.0
    };
    Ok(BootstrapEstimate { mean_of_medians: mean, std_of_medians: var.sqrt(), resamples, sample_size: n })
}

/// Ordinary least-squares line `y = intercept + slope x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::FitFailed(format!("need at least 2 points, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::FitFailed("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept: my - slope * mx, r_squared })
}
