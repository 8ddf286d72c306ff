use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// What one bootstrap draw resamples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResamplingUnit {
    Pair,
    Country,
    Observation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub n_iterations: usize,
    pub unit: ResamplingUnit,
    pub low_percentile: f64,
    pub high_percentile: f64,
    pub seed: u64,
}

impl BootstrapSpec {
    pub fn new(n_iterations: usize, unit: ResamplingUnit, seed: u64) -> Self {
        BootstrapSpec { n_iterations, unit, low_percentile: 2.5, high_percentile: 97.5, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(Error::invalid("bootstrap needs at least one iteration"));
        }
        let ok = |p: f64| p > 0.0 && p < 100.0;
        if !ok(self.low_percentile) || !ok(self.high_percentile) || self.low_percentile >= self.high_percentile {
            return Err(Error::invalid("bootstrap percentiles must satisfy 0 < low < high < 100"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Successful replicates in iteration order.
    pub replicates: Vec<f64>,
    pub skipped: usize,
}

/// Fraction of replicates that may be undefined before the bootstrap fails.
const MAX_SKIPPED_FRACTION: f64 = 0.10;

/// `n` indices drawn with replacement from `0..n` on the stream for iteration `b`.
pub fn resample_indices(seed: u64, stage: &str, b: u64, n: usize) -> Vec<usize> {
    let mut r = rng::stream(seed, stage, b);
    (0..n).map(|_| r.random_range(0..n)).collect()
}

/// Linear-interpolation percentile (`q` in 0..=100) of an ascending slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q / 100.0;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Percentile bootstrap over `n_units` resampling units.
///
/// `statistic` receives the resampled unit indices and returns `None` when it
/// is undefined on that resample; such replicates are skipped and counted.
/// Each iteration has its own seeded stream, so the output does not depend on
/// the number of worker threads.
pub fn bootstrap<F>(n_units: usize, statistic: F, spec: &BootstrapSpec, stage: &str) -> Result<BootstrapResult>
where
    F: Fn(&[usize]) -> Option<f64> + Sync,
{
    spec.validate()?;
    if n_units == 0 {
        return Err(Error::EmptyInput);
    }
    let identity: Vec<usize> = (0..n_units).collect();
    let point = statistic(&identity).ok_or_else(|| Error::undefined("statistic undefined on the original sample"))?;
    let draws: Vec<Option<f64>> = (0..spec.n_iterations as u64)
        .into_par_iter()
        .map(|b| {
            let idx = resample_indices(spec.seed, stage, b, n_units);
            statistic(&idx).filter(|v| v.is_finite())
        })
        .collect();
    let skipped = draws.iter().filter(|d| d.is_none()).count();
    if skipped as f64 > MAX_SKIPPED_FRACTION * spec.n_iterations as f64 {
        return Err(Error::Numerical(format!(
            "statistic undefined on {skipped} of {} bootstrap resamples",
            spec.n_iterations
        )));
    }
    let replicates: Vec<f64> = draws.into_iter().flatten().collect();
    let mut sorted = replicates.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(BootstrapResult {
        point,
        ci_low: percentile(&sorted, spec.low_percentile),
        ci_high: percentile(&sorted, spec.high_percentile),
        replicates,
        skipped,
    })
}
