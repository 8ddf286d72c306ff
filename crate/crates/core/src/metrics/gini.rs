use serde::Serialize;

use super::pair_pbrs;
use crate::error::{Error, Result};
use crate::panel::{Panel, Period};

fn check_values(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("Gini values must be finite and nonnegative"));
    }
    let sum: f64 = values.iter().sum();
    if sum <= 0.0 {
        return Err(Error::undefined("Gini of an all-zero vector"));
    }
    Ok(sum)
}

/// Gini coefficient Σ(2i − n − 1)·x_(i) / (n·Σx) over ascending values.
pub fn gini(values: &[f64]) -> Result<f64> {
    let sum = check_values(values)?;
    if values.iter().all(|x| *x == values[0]) {
        return Ok(0.0);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let acc: f64 = v.iter().enumerate().map(|(i, x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x).sum();
    Ok((acc / (n * sum)).max(0.0))
}

/// Weighted Gini: Σ_i w_i x_i (W_<i − W_>i) / (W · Σ w x) over ascending x.
///
/// Reduces to [`gini`] when all weights are equal. Zero-weight entries drop out.
pub fn weighted_gini(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::invalid("values and weights differ in length"));
    }
    check_values(values)?;
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let total_w: f64 = weights.iter().sum();
    let total_wx: f64 = values.iter().zip(weights).map(|(x, w)| x * w).sum();
    if total_w <= 0.0 || total_wx <= 0.0 {
        return Err(Error::undefined("weighted Gini with zero total weight or mass"));
    }
    let mut below = 0.0;
    let mut acc = 0.0;
    for &i in &order {
        let w = weights[i];
        let above = total_w - below - w;
        acc += w * values[i] * (below - above);
        below += w;
    }
    Ok((acc / (total_w * total_wx)).max(0.0))
}

/// Lorenz curve: cumulative x-mass share against cumulative y-mass share.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LorenzCurve {
    pub points: Vec<(f64, f64)>,
    /// 1 − 2 × area under the curve (twice the area between diagonal and curve).
    pub gini: f64,
}

/// Builds a Lorenz curve from `(x_mass, y_mass)` items already in plotting order.
///
/// Interior points collinear with their neighbours are dropped, so a curve on
/// the diagonal is just its two endpoints.
pub fn lorenz_curve(items: &[(f64, f64)]) -> Result<LorenzCurve> {
    if items.len() < 2 {
        return Err(Error::invalid("Lorenz curve needs at least two items"));
    }
    let tx: f64 = items.iter().map(|i| i.0).sum();
    let ty: f64 = items.iter().map(|i| i.1).sum();
    if !(tx > 0.0 && ty > 0.0) || items.iter().any(|(x, y)| *x < 0.0 || *y < 0.0) {
        return Err(Error::invalid("Lorenz masses must be nonnegative with positive totals"));
    }
    let mut raw = Vec::with_capacity(items.len() + 1);
    raw.push((0.0, 0.0));
    let (mut cx, mut cy) = (0.0, 0.0);
    let mut area = 0.0;
    for (x, y) in items {
        let (nx, ny) = (cx + x / tx, cy + y / ty);
        area += (nx - cx) * (ny + cy);
        raw.push((nx.min(1.0), ny.min(1.0)));
        (cx, cy) = (nx, ny);
    }
    *raw.last_mut().unwrap() = (1.0, 1.0);

    let mut points: Vec<(f64, f64)> = vec![raw[0]];
    for next in raw.iter().skip(1) {
        if *next == *points.last().unwrap() {
            continue;
        }
        if points.len() >= 2 {
            let a = points[points.len() - 2];
            let b = points[points.len() - 1];
            let cross = (b.0 - a.0) * (next.1 - a.1) - (b.1 - a.1) * (next.0 - a.0);
            if cross.abs() <= 1e-12 {
                points.pop();
            }
        }
        points.push(*next);
    }
    Ok(LorenzCurve { points, gini: 1.0 - area })
}

/// Participants-vs-burden Lorenz curve over country-disease pairs.
///
/// Pairs are ordered by ascending PBR, ties by (country, disease).
pub fn lorenz(panel: &Panel, period: Period) -> Result<LorenzCurve> {
    let table = pair_pbrs(panel, period)?;
    let mut recs = table.records;
    // pair_pbrs yields (country, disease) order; the stable sort keeps it for ties
    recs.sort_by(|a, b| a.pbr.total_cmp(&b.pbr));
    let items: Vec<(f64, f64)> = recs.iter().map(|r| (r.dalys, r.participants)).collect();
    lorenz_curve(&items)
}
