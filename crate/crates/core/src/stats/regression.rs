use serde::{Deserialize, Serialize};

use super::{mean, student_t_two_sided};
use crate::error::{Error, Result};

/// Simple least-squares line `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r_squared: f64,
    /// Two-sided p for slope = 0, t with n - 2 df.
    pub p_value: f64,
    pub n: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::invalid("regression inputs must have equal length"));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::invalid("simple regression needs at least three points"));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) * n as f64 {
        return Err(Error::Singular("all x values identical".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let df = (n - 2) as f64;
    let slope_se = (sse / df / sxx).sqrt();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let p_value = if slope_se == 0.0 {
        if slope == 0.0 { 1.0 } else { 0.0 }
    } else {
        student_t_two_sided(slope / slope_se, df)
    };
    Ok(LinearFit { slope, intercept, slope_se, r_squared, p_value, n })
}
