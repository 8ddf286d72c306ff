//! Shared statistical kernels.

mod bootstrap;
mod contingency;
mod regression;

pub use bootstrap::{bootstrap, percentile, resample_indices, BootstrapResult, BootstrapSpec, ResamplingUnit};
pub use contingency::{chi_square, cramers_v_corrected, ChiSquare, ContingencyTable, CramersV, EffectBand};
pub use regression::{linear_fit, LinearFit};
pub use tests::{
    kruskal_wallis, mean_difference, paired_t_test, pearson, permutation_test, ranks, spearman, student_t_two_sided,
    Correlation, KruskalWallis, PairedTTest, PermutationTest,
};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (divisor n - 1).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Median of a non-empty slice (mean of the two central values for even n).
pub fn median(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}
