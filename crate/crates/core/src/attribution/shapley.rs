use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Design, SubsetR2};
use crate::error::{Error, Result};
use crate::panel::{BlockSpec, Predictor};
use crate::rng;
use crate::stats::{percentile, resample_indices};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapleyConfig {
    pub n_permutations: usize,
    pub n_bootstrap: usize,
    /// Orderings sampled inside each bootstrap resample.
    pub bootstrap_permutations: usize,
    /// Average over every ordering instead of sampling.
    pub exhaustive: bool,
    pub seed: u64,
}

impl Default for ShapleyConfig {
    fn default() -> Self {
        ShapleyConfig { n_permutations: 100, n_bootstrap: 100, bootstrap_permutations: 50, exhaustive: false, seed: 42 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapleyShare {
    pub predictor: Predictor,
    /// Mean marginal R² (same units as R²).
    pub phi: f64,
    /// Share of the full-model R², in percent.
    pub percent: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockShare {
    pub block: String,
    pub percent: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapleyResult {
    pub r2_full: f64,
    pub shares: Vec<ShapleyShare>,
    pub blocks: Vec<BlockShare>,
    pub n_permutations: usize,
    pub n_bootstrap: usize,
    pub exhaustive: bool,
    pub skipped_bootstrap: usize,
}

/// Largest predictor count handled by exhaustive enumeration.
pub const MAX_EXHAUSTIVE: usize = 20;

/// Exact Shapley values: Σ_S |S|!(P−|S|−1)!/P! · [R²(S ∪ i) − R²(S)],
/// which equals the average over all P! orderings.
pub fn exact_shapley(model: &SubsetR2) -> Result<Vec<f64>> {
    let p = model.n_predictors();
    if p > MAX_EXHAUSTIVE {
        return Err(Error::invalid(format!("exhaustive Shapley limited to {MAX_EXHAUSTIVE} predictors")));
    }
    let r2: Vec<f64> = (0..1u64 << p).into_par_iter().map(|m| model.r2(m)).collect();
    // weight[k] = k!(p-k-1)!/p!
    let mut weight = vec![0.0; p.max(1)];
    for (k, w) in weight.iter_mut().enumerate().take(p) {
        let mut v = 1.0 / p as f64;
        // 1/(p * C(p-1, k))
        let mut c = 1.0;
        for j in 0..k {
            c = c * (p - 1 - j) as f64 / (j + 1) as f64;
        }
        v /= c;
        *w = v;
    }
    Ok((0..p)
        .map(|i| {
            let bit = 1u64 << i;
            (0..1u64 << p)
                .filter(|m| m & bit == 0)
                .map(|m| weight[m.count_ones() as usize] * (r2[(m | bit) as usize] - r2[m as usize]))
                .sum()
        })
        .collect())
}

/// Shapley values averaged over `n` random orderings drawn from `stage` streams.
pub fn sampled_shapley(model: &SubsetR2, n: usize, seed: u64, stage: &str, offset: u64) -> Vec<f64> {
    let p = model.n_predictors();
    let per: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let mut order: Vec<usize> = (0..p).collect();
            order.shuffle(&mut rng::stream(seed, stage, offset + k));
            let gains = model.prefix_gains(&order);
            let mut phi = vec![0.0; p];
            for (pos, &j) in order.iter().enumerate() {
                phi[j] = gains[pos];
            }
            phi
        })
        .collect();
    let mut phi = vec![0.0; p];
    for v in &per {
        for (a, b) in phi.iter_mut().zip(v) {
            *a += b;
        }
    }
    phi.iter().map(|v| v / n as f64).collect()
}

fn percents(phi: &[f64], r2: f64) -> Vec<f64> {
    phi.iter().map(|v| v / r2 * 100.0).collect()
}

fn block_sums(percent: &[f64], members: &[Vec<usize>]) -> Vec<f64> {
    members.iter().map(|m| m.iter().map(|&i| percent[i]).sum()).collect()
}

/// Shapley decomposition of the full-model R² over the design's predictors,
/// with a bootstrap over countries for percentile intervals.
pub fn shapley_r2(design: &Design, blocks: &[BlockSpec], cfg: &ShapleyConfig) -> Result<ShapleyResult> {
    let p = design.predictors.len();
    if p == 0 {
        return Err(Error::invalid("Shapley decomposition needs at least one predictor"));
    }
    if p > 63 {
        return Err(Error::invalid("too many predictors"));
    }
    if design.n() <= p + 1 {
        return Err(Error::Singular(format!("{} countries for {p} predictors", design.n())));
    }
    if !cfg.exhaustive && cfg.n_permutations == 0 {
        return Err(Error::invalid("n_permutations must be positive"));
    }
    let model = SubsetR2::new(&design.y, &design.columns)?;
    let r2_full = model.r2((1u64 << p) - 1);
    if r2_full <= 0.0 {
        return Err(Error::undefined("full-model R² is zero; percentages undefined"));
    }
    let phi = if cfg.exhaustive {
        exact_shapley(&model)?
    } else {
        sampled_shapley(&model, cfg.n_permutations, cfg.seed, "shapley-permutation", 0)
    };
    let pct = percents(&phi, r2_full);
    let members: Vec<Vec<usize>> =
        blocks.iter().map(|b| b.members.iter().filter_map(|m| design.index_of(*m)).collect()).collect();
    let block_pct = block_sums(&pct, &members);

    let mut ci: Vec<(Option<f64>, Option<f64>)> = vec![(None, None); p];
    let mut block_ci: Vec<(Option<f64>, Option<f64>)> = vec![(None, None); blocks.len()];
    let mut skipped = 0;
    if cfg.n_bootstrap > 0 {
        if cfg.bootstrap_permutations == 0 {
            return Err(Error::invalid("bootstrap_permutations must be positive"));
        }
        let reps: Vec<Option<Vec<f64>>> = (0..cfg.n_bootstrap as u64)
            .map(|b| {
                let rows = resample_indices(cfg.seed, "shapley-bootstrap", b, design.n());
                let d = design.take_rows(&rows);
                let m = SubsetR2::new(&d.y, &d.columns).ok()?;
                let r2 = m.r2((1u64 << p) - 1);
                if r2 <= 0.0 {
                    return None;
                }
                let bp = cfg.bootstrap_permutations as u64;
                let phi = sampled_shapley(&m, cfg.bootstrap_permutations, cfg.seed, "shapley-bootstrap-permutation", b * bp);
                Some(percents(&phi, r2))
            })
            .collect();
        let ok: Vec<Vec<f64>> = reps.into_iter().flatten().collect();
        skipped = cfg.n_bootstrap - ok.len();
        if skipped as f64 > 0.1 * cfg.n_bootstrap as f64 {
            return Err(Error::Numerical(format!("Shapley undefined on {skipped} of {} resamples", cfg.n_bootstrap)));
        }
        let interval = |vals: Vec<f64>| {
            let mut v = vals;
            v.sort_by(f64::total_cmp);
            (Some(percentile(&v, 2.5)), Some(percentile(&v, 97.5)))
        };
        for (i, c) in ci.iter_mut().enumerate() {
            *c = interval(ok.iter().map(|r| r[i]).collect());
        }
        for (j, c) in block_ci.iter_mut().enumerate() {
            *c = interval(ok.iter().map(|r| block_sums(r, &members)[j]).collect());
        }
    }
    Ok(ShapleyResult {
        r2_full,
        shares: (0..p)
            .map(|i| ShapleyShare {
                predictor: design.predictors[i],
                phi: phi[i],
                percent: pct[i],
                ci_low: ci[i].0,
                ci_high: ci[i].1,
            })
            .collect(),
        blocks: blocks
            .iter()
            .enumerate()
            .map(|(j, b)| BlockShare { block: b.name.clone(), percent: block_pct[j], ci_low: block_ci[j].0, ci_high: block_ci[j].1 })
            .collect(),
        n_permutations: if cfg.exhaustive { 0 } else { cfg.n_permutations },
        n_bootstrap: cfg.n_bootstrap,
        exhaustive: cfg.exhaustive,
        skipped_bootstrap: skipped,
    })
}
