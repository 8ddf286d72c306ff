//! Structural attribution of national log-PBR: OLS, median imputation,
//! standardization, hierarchical block partitioning, Shapley R² shares and
//! residualization on economic controls.

mod ols;
mod prep;
mod shapley;

use std::collections::BTreeMap;

use serde::Serialize;

pub use ols::{ols, Coefficient, OlsFit, SubsetR2};
pub use prep::{build_design, impute_median, standardize, standardize_column, Design, Exclusion, Imputation, Standardization};
pub use shapley::{exact_shapley, sampled_shapley, shapley_r2, BlockShare, ShapleyConfig, ShapleyResult, ShapleyShare};

use crate::error::{Error, Result};
use crate::panel::{BlockSpec, CountryCode, Panel, Period, Predictor, PredictorTable};

/// National ln(Σ participants / Σ DALYs) for countries with both totals positive.
///
/// This differs from the log of the share-normalized national PBR only by a
/// constant, which leaves R² and residuals unchanged.
pub fn part1_response(panel: &Panel, period: Period) -> BTreeMap<CountryCode, f64> {
    panel
        .country_totals(period)
        .into_iter()
        .filter(|(_, t)| t.participants > 0.0 && t.dalys > 0.0)
        .map(|(c, t)| (c, (t.participants / t.dalys).ln()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockStep {
    pub block: String,
    pub members: Vec<Predictor>,
    pub cumulative_r2: f64,
    pub incremental_r2: f64,
}

/// Enters blocks in order and records cumulative and incremental R².
///
/// Block members missing from the design are ignored; a block with no usable
/// members contributes zero.
pub fn hierarchical_partition(design: &Design, blocks: &[BlockSpec]) -> Result<Vec<BlockStep>> {
    BlockSpec::validate(blocks)?;
    let mut entered: Vec<Predictor> = Vec::new();
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(blocks.len());
    for b in blocks {
        let members: Vec<Predictor> = b.members.iter().copied().filter(|p| design.index_of(*p).is_some()).collect();
        entered.extend(&members);
        let cumulative = if entered.is_empty() {
            0.0
        } else {
            ols(&design.y, &design.named_columns(&entered), true)
                .map_err(|e| match e {
                    Error::Singular(m) => Error::Singular(format!("block `{}`: {m}", b.name)),
                    other => other,
                })?
                .r2
        };
        out.push(BlockStep { block: b.name.clone(), members, cumulative_r2: cumulative, incremental_r2: cumulative - prev });
        prev = cumulative;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualRecord {
    pub country: CountryCode,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Residualization {
    pub records: Vec<ResidualRecord>,
    pub fit: OlsFit,
    /// Residual variance as a fraction of the response variance (1 − R²).
    pub residual_variance_fraction: f64,
    /// Countries dropped for lacking GDP or population.
    pub dropped: Vec<CountryCode>,
}

impl Residualization {
    pub fn as_response(&self) -> BTreeMap<CountryCode, f64> {
        self.records.iter().map(|r| (r.country, r.residual)).collect()
    }
}

/// Regresses national log-PBR on log GDP and log population and keeps the residuals.
pub fn residualize_part2(response: &BTreeMap<CountryCode, f64>, table: &PredictorTable) -> Result<Residualization> {
    let mut countries = Vec::new();
    let mut y = Vec::new();
    let mut gdp = Vec::new();
    let mut pop = Vec::new();
    let mut dropped = Vec::new();
    for (c, v) in response {
        match (table.value(*c, Predictor::LogGdp), table.value(*c, Predictor::LogPopulation)) {
            (Some(g), Some(p)) => {
                countries.push(*c);
                y.push(*v);
                gdp.push(g);
                pop.push(p);
            }
            _ => dropped.push(*c),
        }
    }
    let fit = ols(
        &y,
        &[(Predictor::LogGdp.name().into(), gdp), (Predictor::LogPopulation.name().into(), pop)],
        true,
    )?;
    let records = countries.iter().zip(&fit.residuals).map(|(c, r)| ResidualRecord { country: *c, residual: *r }).collect();
    let residual_variance_fraction = 1.0 - fit.r2;
    Ok(Residualization { records, fit, residual_variance_fraction, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::cc;

    fn code(i: usize) -> CountryCode {
        cc(&format!("X{}{}", (b'A' + (i / 26) as u8) as char, (b'A' + (i % 26) as u8) as char))
    }

    /// Deterministic pseudo-random numbers for fixtures.
    fn noise(i: usize, salt: usize) -> f64 {
        let v = ((i * 2654435761 + salt * 40503) % 10007) as f64 / 10007.0;
        v - 0.5
    }

    fn design(p: usize, n: usize, y: impl Fn(&[f64], usize) -> f64) -> Design {
        let columns: Vec<Vec<f64>> = (0..p).map(|j| (0..n).map(|i| noise(i, j + 1)).collect()).collect();
        let yv = (0..n).map(|i| y(&columns.iter().map(|c| c[i]).collect::<Vec<_>>(), i)).collect();
        Design {
            countries: (0..n).map(code).collect(),
            y: yv,
            predictors: Predictor::ALL[..p].to_vec(),
            columns,
            excluded: vec![],
        }
    }

    #[test]
    fn single_block_matches_full_model() {
        let d = design(3, 40, |x, i| x[0] + 0.5 * x[1] + 0.3 * noise(i, 99));
        let full = ols(&d.y, &d.named_columns(&d.predictors), true).unwrap().r2;
        let steps = hierarchical_partition(&d, &[BlockSpec::new("all", d.predictors.clone())]).unwrap();
        assert!((steps[0].cumulative_r2 - full).abs() < 1e-12);
        assert_eq!(steps[0].incremental_r2, steps[0].cumulative_r2);
    }

    #[test]
    fn hierarchical_order_invariance() {
        let d = design(4, 50, |x, i| x[0] - x[2] + 0.7 * x[3] + 0.4 * noise(i, 7));
        let a = BlockSpec::new("a", [Predictor::ALL[0], Predictor::ALL[1]]);
        let b = BlockSpec::new("b", [Predictor::ALL[2]]);
        let c = BlockSpec::new("c", [Predictor::ALL[3]]);
        let s1 = hierarchical_partition(&d, &[a.clone(), b.clone(), c.clone()]).unwrap();
        let s2 = hierarchical_partition(&d, &[c, a, b]).unwrap();
        assert!((s1[2].cumulative_r2 - s2[2].cumulative_r2).abs() < 1e-9);
        assert!(s1.iter().all(|s| s.incremental_r2 >= -1e-9));
    }

    #[test]
    fn residualization_recovers_planted_residuals() {
        let n = 30;
        let planted: Vec<f64> = (0..n).map(|i| noise(i, 5)).collect();
        let gdp: Vec<f64> = (0..n).map(|i| 8.0 + 4.0 * noise(i, 1)).collect();
        let pop: Vec<f64> = (0..n).map(|i| 15.0 + 3.0 * noise(i, 2)).collect();
        // make the planted residuals orthogonal to [1, gdp, pop]
        let proj = ols(&planted, &[("g".into(), gdp.clone()), ("p".into(), pop.clone())], true).unwrap();
        let resid = proj.residuals.clone();
        let countries: Vec<CountryCode> = (0..n).map(code).collect();
        let mut cols = BTreeMap::new();
        cols.insert(Predictor::LogGdp, gdp.iter().map(|v| Some(*v)).collect());
        cols.insert(Predictor::LogPopulation, pop.iter().map(|v| Some(*v)).collect());
        let table = PredictorTable::new(countries.clone(), cols, vec![None; n]).unwrap();
        let response: BTreeMap<CountryCode, f64> =
            (0..n).map(|i| (countries[i], 0.5 + 0.3 * gdp[i] - 0.2 * pop[i] + resid[i])).collect();
        let r = residualize_part2(&response, &table).unwrap();
        for rec in &r.records {
            let i = countries.iter().position(|c| *c == rec.country).unwrap();
            assert!((rec.residual - resid[i]).abs() < 1e-9);
        }
        let exact: BTreeMap<CountryCode, f64> = (0..n).map(|i| (countries[i], 1.0 + gdp[i] + pop[i])).collect();
        let r = residualize_part2(&exact, &table).unwrap();
        assert!(r.records.iter().all(|x| x.residual.abs() < 1e-9));
    }

    #[test]
    fn shapley_one_predictor_is_everything() {
        let d = design(1, 20, |x, i| x[0] + 0.2 * noise(i, 3));
        let cfg = ShapleyConfig { n_bootstrap: 20, ..Default::default() };
        let r = shapley_r2(&d, &[], &cfg).unwrap();
        assert!((r.shares[0].percent - 100.0).abs() < 1e-9);
    }

    #[test]
    fn shapley_exhaustive_efficiency_and_symmetry() {
        let mut d = design(4, 60, |x, i| x[0] + 0.6 * x[1] - 0.4 * x[2] + 0.2 * x[3] + 0.3 * noise(i, 11));
        let model = SubsetR2::new(&d.y, &d.columns).unwrap();
        let phi = exact_shapley(&model).unwrap();
        assert!((phi.iter().sum::<f64>() - model.r2(0b1111)).abs() < 1e-9);
        // duplicate predictor 0 into a fifth column
        d.columns.push(d.columns[0].clone());
        d.predictors.push(Predictor::ALL[10]);
        let model = SubsetR2::new(&d.y, &d.columns).unwrap();
        let phi = exact_shapley(&model).unwrap();
        assert!((phi[0] - phi[4]).abs() < 1e-9);
        assert!((phi.iter().sum::<f64>() - model.r2(0b11111)).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_pair_splits_evenly() {
        // x1, x2 orthogonal with equal variance, y = x1 + x2
        let x1 = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let x2 = [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let d = Design {
            countries: (0..8).map(code).collect(),
            y: x1.iter().zip(&x2).map(|(a, b)| a + b).collect(),
            predictors: vec![Predictor::Hdi, Predictor::DemocracyIndex],
            columns: vec![x1.to_vec(), x2.to_vec()],
            excluded: vec![],
        };
        let cfg = ShapleyConfig { n_bootstrap: 0, ..Default::default() };
        let r = shapley_r2(&d, &[], &cfg).unwrap();
        for s in &r.shares {
            assert!((s.percent - 50.0).abs() <= 2.0);
        }
        let r = shapley_r2(&d, &[], &ShapleyConfig { exhaustive: true, ..cfg }).unwrap();
        assert!((r.shares[0].percent - 50.0).abs() < 1e-9);
    }

    #[test]
    fn shapley_blocks_and_bootstrap_determinism() {
        let d = design(4, 60, |x, i| x[0] + 0.6 * x[1] - 0.4 * x[2] + 0.2 * x[3] + 0.3 * noise(i, 11));
        let blocks = vec![
            BlockSpec::new("first", [Predictor::ALL[0], Predictor::ALL[1]]),
            BlockSpec::new("second", [Predictor::ALL[2], Predictor::ALL[3]]),
        ];
        let cfg = ShapleyConfig { n_bootstrap: 30, ..Default::default() };
        let a = shapley_r2(&d, &blocks, &cfg).unwrap();
        let total: f64 = a.shares.iter().map(|s| s.percent).sum();
        assert!((total - 100.0).abs() < 1e-9);
        assert_eq!(a.blocks[0].percent, a.shares[0].percent + a.shares[1].percent);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| shapley_r2(&d, &blocks, &cfg).unwrap());
        assert_eq!(a, b);
        assert!(a.shares.iter().all(|s| s.ci_low.unwrap() <= s.ci_high.unwrap()));
    }

    #[test]
    fn zero_r2_is_undefined() {
        let d = Design {
            countries: (0..4).map(code).collect(),
            y: vec![1.0, 1.0, -1.0, -1.0],
            predictors: vec![Predictor::Hdi],
            columns: vec![vec![-1.0, 1.0, -1.0, 1.0]],
            excluded: vec![],
        };
        assert!(shapley_r2(&d, &[], &ShapleyConfig::default()).is_err());
    }
}
