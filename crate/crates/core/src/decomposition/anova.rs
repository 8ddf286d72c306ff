use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::PbrRecord;

/// One observation of the additive three-factor model; levels are 0-based indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorObs {
    pub levels: [usize; 3],
    pub y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationVariant {
    /// Country, then disease, then year.
    Sequential,
    /// Each factor's SS with the other two already in the model.
    Marginal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VariancePartition {
    pub estimation_variant: EstimationVariant,
    pub r2_country: f64,
    pub r2_disease: f64,
    pub r2_year: f64,
    pub r2_residual: f64,
    pub n_obs: usize,
}

impl VariancePartition {
    pub fn shares(&self) -> [f64; 3] {
        [self.r2_country, self.r2_disease, self.r2_year]
    }
}

/// Sum-to-zero effects of the full additive model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Effects {
    pub mu: f64,
    pub country: Vec<(String, f64)>,
    pub disease: Vec<(String, f64)>,
    pub year: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionReport {
    pub sequential: VariancePartition,
    pub marginal: VariancePartition,
    /// Largest absolute gap between sequential and marginal shares.
    pub discrepancy: f64,
    pub ss_total: f64,
    pub effects: Effects,
    /// Records dropped because log-PBR is undefined (zero participation).
    pub excluded_zero: usize,
}

struct Fit {
    rss: f64,
    beta: DVector<f64>,
}

/// Least squares with an intercept plus treatment-coded dummies for `factors`.
fn fit(obs: &[FactorObs], n_levels: [usize; 3], factors: &[usize]) -> Result<Fit> {
    let mut offset = [usize::MAX; 3];
    let mut p = 1;
    for &f in factors {
        offset[f] = p;
        p += n_levels[f] - 1;
    }
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut cols = Vec::with_capacity(4);
    let columns = |o: &FactorObs, cols: &mut Vec<usize>| {
        cols.clear();
        cols.push(0);
        for &f in factors {
            if o.levels[f] > 0 {
                cols.push(offset[f] + o.levels[f] - 1);
            }
        }
    };
    for o in obs {
        columns(o, &mut cols);
        for &i in &cols {
            xty[i] += o.y;
            for &j in &cols {
                xtx[(i, j)] += 1.0;
            }
        }
    }
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::Singular("fixed-effects design is rank deficient (confounded factors)".into()))?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !(lo > 1e-7 * hi) {
        return Err(Error::Singular("fixed-effects design is rank deficient (confounded factors)".into()));
    }
    let beta = chol.solve(&xty);
    let mut rss = 0.0;
    for o in obs {
        columns(o, &mut cols);
        let fitted: f64 = cols.iter().map(|&i| beta[i]).sum();
        rss += (o.y - fitted).powi(2);
    }
    Ok(Fit { rss, beta })
}

fn shares(variant: EstimationVariant, ss: [f64; 3], rss: f64, sst: f64, n: usize) -> VariancePartition {
    let f = |v: f64| (v / sst).clamp(0.0, 1.0);
    VariancePartition {
        estimation_variant: variant,
        r2_country: f(ss[0]),
        r2_disease: f(ss[1]),
        r2_year: f(ss[2]),
        r2_residual: f(rss),
        n_obs: n,
    }
}

/// Variance partition of `y = μ + α_country + β_disease + γ_year + ε`.
///
/// Returns (sequential, marginal, sum-to-zero effects as level-indexed vectors, SS_total).
pub fn partition_observations(
    obs: &[FactorObs],
    n_levels: [usize; 3],
) -> Result<(VariancePartition, VariancePartition, [Vec<f64>; 3], f64, f64)> {
    if n_levels.iter().any(|&l| l < 2) {
        return Err(Error::invalid("each factor needs at least two levels"));
    }
    if obs.iter().any(|o| o.levels.iter().zip(n_levels).any(|(l, n)| *l >= n) || !o.y.is_finite()) {
        return Err(Error::invalid("observation level out of range or non-finite response"));
    }
    let n = obs.len();
    let p_full = 1 + n_levels.iter().map(|l| l - 1).sum::<usize>();
    if n <= p_full {
        return Err(Error::Singular(format!("{n} observations for {p_full} parameters")));
    }
    let mean = obs.iter().map(|o| o.y).sum::<f64>() / n as f64;
    let sst: f64 = obs.iter().map(|o| (o.y - mean).powi(2)).sum();
    if sst <= 0.0 {
        return Err(Error::undefined("response has zero total sum of squares"));
    }
    let full = fit(obs, n_levels, &[0, 1, 2])?;
    let c = fit(obs, n_levels, &[0])?;
    let cd = fit(obs, n_levels, &[0, 1])?;
    let seq = [sst - c.rss, c.rss - cd.rss, cd.rss - full.rss];
    let dt = fit(obs, n_levels, &[1, 2])?;
    let ct = fit(obs, n_levels, &[0, 2])?;
    let marg = [dt.rss - full.rss, ct.rss - full.rss, cd.rss - full.rss];

    let mut effects: [Vec<f64>; 3] = Default::default();
    let mut mu = full.beta[0];
    let mut off = 1;
    for f in 0..3 {
        let mut a = vec![0.0];
        a.extend((0..n_levels[f] - 1).map(|i| full.beta[off + i]));
        off += n_levels[f] - 1;
        let m = a.iter().sum::<f64>() / a.len() as f64;
        mu += m;
        effects[f] = a.into_iter().map(|v| v - m).collect();
    }
    Ok((
        shares(EstimationVariant::Sequential, seq, full.rss, sst, n),
        shares(EstimationVariant::Marginal, marg, full.rss, sst, n),
        effects,
        mu,
        sst,
    ))
}

/// Variance partition of log-PBR over (country, disease, year) records.
pub fn variance_partition(records: &[PbrRecord]) -> Result<PartitionReport> {
    let mut country: BTreeMap<String, usize> = BTreeMap::new();
    let mut disease: BTreeMap<String, usize> = BTreeMap::new();
    let mut year: BTreeMap<String, usize> = BTreeMap::new();
    let mut usable = Vec::new();
    let mut excluded_zero = 0;
    for r in records {
        let (Some(d), Some(y)) = (r.disease, r.year) else {
            return Err(Error::invalid("variance partition needs country-disease-year records"));
        };
        match r.log_pbr.value() {
            Some(v) => usable.push((r.country.to_string(), d.name().to_string(), y.to_string(), v)),
            None => excluded_zero += 1,
        }
    }
    for (c, d, y, _) in &usable {
        country.entry(c.clone()).or_default();
        disease.entry(d.clone()).or_default();
        year.entry(y.clone()).or_default();
    }
    for m in [&mut country, &mut disease, &mut year] {
        for (i, v) in m.values_mut().enumerate() {
            *v = i;
        }
    }
    let obs: Vec<FactorObs> = usable
        .iter()
        .map(|(c, d, y, v)| FactorObs { levels: [country[c], disease[d], year[y]], y: *v })
        .collect();
    let (sequential, marginal, eff, mu, ss_total) =
        partition_observations(&obs, [country.len(), disease.len(), year.len()])?;
    let label = |m: &BTreeMap<String, usize>, e: &[f64]| m.keys().cloned().zip(e.iter().copied()).collect();
    let effects = Effects {
        mu,
        country: label(&country, &eff[0]),
        disease: label(&disease, &eff[1]),
        year: label(&year, &eff[2]),
    };
    let discrepancy = sequential
        .shares()
        .iter()
        .zip(marginal.shares())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(PartitionReport { sequential, marginal, discrepancy, ss_total, effects, excluded_zero })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Balanced 3×3×2 design with planted sum-to-zero effects and an
    /// interaction-shaped residual orthogonal to every main effect.
    fn balanced() -> (Vec<FactorObs>, [f64; 4]) {
        let a = [-1.0, 0.25, 0.75];
        let b = [0.5, -0.2, -0.3];
        let g = [0.1, -0.1];
        let u = [1.0, -2.0, 1.0];
        let v = [1.0, 0.0, -1.0];
        let delta = 0.05;
        let mut obs = Vec::new();
        for c in 0..3 {
            for d in 0..3 {
                for t in 0..2 {
                    let y = 2.0 + a[c] + b[d] + g[t] + delta * u[c] * v[d];
                    obs.push(FactorObs { levels: [c, d, t], y });
                }
            }
        }
        let sq = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        // balanced-ANOVA closed forms: SS_a = (levels of other factors) × Σ a²
        let ss_a = 3.0 * 2.0 * sq(&a);
        let ss_b = 3.0 * 2.0 * sq(&b);
        let ss_g = 3.0 * 3.0 * sq(&g);
        let ss_e = 2.0 * delta * delta * sq(&u) * sq(&v);
        let tot = ss_a + ss_b + ss_g + ss_e;
        (obs, [ss_a / tot, ss_b / tot, ss_g / tot, ss_e / tot])
    }

    #[test]
    fn balanced_design_recovers_closed_form_shares() {
        let (obs, want) = balanced();
        let (seq, marg, eff, mu, _) = partition_observations(&obs, [3, 3, 2]).unwrap();
        for (got, w) in seq.shares().iter().chain([seq.r2_residual].iter()).zip(want) {
            assert!((got - w).abs() < 1e-6, "{got} vs {w}");
        }
        for (s, m) in seq.shares().iter().zip(marg.shares()) {
            assert!((s - m).abs() < 1e-9);
        }
        assert!((mu - 2.0).abs() < 1e-9);
        assert!((eff[0][0] + 1.0).abs() < 1e-9 && (eff[2][1] + 0.1).abs() < 1e-9);
    }

    #[test]
    fn pure_country_effects() {
        let mut obs = Vec::new();
        for c in 0..4 {
            for d in 0..3 {
                for t in 0..3 {
                    obs.push(FactorObs { levels: [c, d, t], y: c as f64 * 1.5 });
                }
            }
        }
        let (seq, ..) = partition_observations(&obs, [4, 3, 3]).unwrap();
        assert!((seq.r2_country - 1.0).abs() < 1e-9);
        assert!(seq.r2_disease < 1e-9 && seq.r2_year < 1e-9);
    }

    #[test]
    fn confounded_factors_are_singular() {
        // disease level always equals country level
        let mut obs = Vec::new();
        for c in 0..3 {
            for t in 0..3 {
                obs.push(FactorObs { levels: [c, c, t], y: (c * 3 + t) as f64 });
            }
        }
        assert!(matches!(partition_observations(&obs, [3, 3, 3]), Err(Error::Singular(_))));
        assert!(partition_observations(&obs, [3, 3, 1]).is_err());
    }
}
