use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::student_t_two_sided;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OlsFit {
    /// Intercept first (named `intercept`) when fitted with one.
    pub coefficients: Vec<Coefficient>,
    pub r2: f64,
    pub n: usize,
    pub df_residual: usize,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
}

impl OlsFit {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

/// Relative size below which an R diagonal entry counts as rank deficiency.
const RANK_TOL: f64 = 1e-10;

/// Ordinary least squares with classical standard errors.
///
/// p values are two-sided from the t distribution with n − k degrees of
/// freedom, k counting the intercept. Solved by Householder QR.
pub fn ols(y: &[f64], columns: &[(String, Vec<f64>)], intercept: bool) -> Result<OlsFit> {
    let n = y.len();
    if columns.iter().any(|(_, c)| c.len() != n) {
        return Err(Error::invalid("regressor length differs from response length"));
    }
    if y.iter().chain(columns.iter().flat_map(|(_, c)| c)).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in regression input"));
    }
    let k = columns.len() + usize::from(intercept);
    if k == 0 {
        return Err(Error::invalid("regression needs at least one term"));
    }
    if n <= k {
        return Err(Error::Singular(format!("{n} observations for {k} coefficients")));
    }
    let mut names: Vec<String> = Vec::with_capacity(k);
    if intercept {
        names.push("intercept".into());
    }
    names.extend(columns.iter().map(|(n, _)| n.clone()));
    let x = DMatrix::from_fn(n, k, |i, j| {
        if intercept {
            if j == 0 { 1.0 } else { columns[j - 1].1[i] }
        } else {
            columns[j].1[i]
        }
    });
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= RANK_TOL * max_diag.max(f64::MIN_POSITIVE)) {
        return Err(Error::Singular("design matrix is not of full column rank".into()));
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let fitted_v = &x * &beta;
    let fitted: Vec<f64> = fitted_v.iter().copied().collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let tss: f64 = if intercept {
        let m = y.iter().sum::<f64>() / n as f64;
        y.iter().map(|v| (v - m).powi(2)).sum()
    } else {
        y.iter().map(|v| v * v).sum()
    };
    let r2 = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 0.0 };
    let df = n - k;
    let sigma2 = rss / df as f64;
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Singular("triangular inverse failed".into()))?;
    let coefficients = (0..k)
        .map(|j| {
            let se = (sigma2 * rinv.row(j).iter().map(|v| v * v).sum::<f64>()).sqrt();
            let est = beta[j];
            let (t, p) = if se > 0.0 {
                let t = est / se;
                (t, student_t_two_sided(t, df as f64))
            } else if est == 0.0 {
                (0.0, 1.0)
            } else {
                (est.signum() * f64::INFINITY, 0.0)
            };
            Coefficient { name: names[j].clone(), estimate: est, std_error: se, t, p_value: p }
        })
        .collect();
    Ok(OlsFit { coefficients, r2, n, df_residual: df, residuals, fitted })
}

/// R² of regressing `y` on every subset of a fixed set of columns.
///
/// Centered cross-products are computed once; each subset R² is a pivoted
/// forward solve that skips linearly dependent columns, so subsets containing
/// collinear predictors still get the R² of their column space.
#[derive(Clone, Debug)]
pub struct SubsetR2 {
    cross: DMatrix<f64>,
    xy: DVector<f64>,
    yy: f64,
}

impl SubsetR2 {
    pub fn new(y: &[f64], columns: &[Vec<f64>]) -> Result<Self> {
        let n = y.len();
        if n < 2 || columns.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("subset R² needs aligned columns and at least two rows"));
        }
        let p = columns.len();
        let my = y.iter().sum::<f64>() / n as f64;
        let yc: Vec<f64> = y.iter().map(|v| v - my).collect();
        let xc: Vec<Vec<f64>> = columns
            .iter()
            .map(|c| {
                let m = c.iter().sum::<f64>() / n as f64;
                c.iter().map(|v| v - m).collect()
            })
            .collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let cross = DMatrix::from_fn(p, p, |i, j| dot(&xc[i], &xc[j]));
        let xy = DVector::from_fn(p, |i, _| dot(&xc[i], &yc));
        let yy = dot(&yc, &yc);
        if yy <= 0.0 {
            return Err(Error::undefined("response has zero variance"));
        }
        Ok(SubsetR2 { cross, xy, yy })
    }

    pub fn n_predictors(&self) -> usize {
        self.xy.len()
    }

    /// R² of the model with an intercept and the columns whose bits are set in `mask`.
    pub fn r2(&self, mask: u64) -> f64 {
        let idx: Vec<usize> = (0..self.n_predictors()).filter(|i| mask >> i & 1 == 1).collect();
        self.prefix_gains(&idx).iter().sum::<f64>().clamp(0.0, 1.0)
    }

    /// R² gained by each column when entered in `order` (zero for a column
    /// already spanned by earlier ones). Prefix sums are the nested-model R².
    pub fn prefix_gains(&self, order: &[usize]) -> Vec<f64> {
        let mut gains = vec![0.0; order.len()];
        // incremental Cholesky of cross[order, order]; rows of L for kept columns only
        let mut kept: Vec<usize> = Vec::with_capacity(order.len());
        let mut l: Vec<Vec<f64>> = Vec::with_capacity(order.len());
        let mut z: Vec<f64> = Vec::with_capacity(order.len());
        for (pos, &j) in order.iter().enumerate() {
            let mut row = Vec::with_capacity(kept.len() + 1);
            for (a, &i) in kept.iter().enumerate() {
                let s: f64 = (0..a).map(|b| l[a][b] * row[b]).sum();
                row.push((self.cross[(j, i)] - s) / l[a][a]);
            }
            let d = self.cross[(j, j)] - row.iter().map(|v| v * v).sum::<f64>();
            if d <= 1e-10 * self.cross[(j, j)].max(f64::MIN_POSITIVE) {
                continue;
            }
            let diag = d.sqrt();
            let zj = (self.xy[j] - row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>()) / diag;
            row.push(diag);
            l.push(row);
            z.push(zj);
            kept.push(j);
            gains[pos] = zj * zj / self.yy;
        }
        gains
    }
}
