//! Residual-based classification of country-disease pairs and limiting-factor
//! diagnosis from disease-specific regressions.

mod assign;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use assign::{assign_factor_as_expected, assign_factor_overperforming, ComponentMapping, Components, Component};

use crate::attribution::{build_design, ols, OlsFit};
use crate::error::{Error, Result};
use crate::metrics::pair_pbrs;
use crate::panel::{BlockSpec, CountryCode, DiseaseCategory, Panel, Period, Predictor, PredictorTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    OverPerforming,
    AsExpected,
    UnderPerforming,
    Unclassified,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::OverPerforming => "Over-performing",
            Status::AsExpected => "As-expected",
            Status::UnderPerforming => "Under-performing",
            Status::Unclassified => "Unclassified",
        }
    }
}

/// Limiting factors; declaration order is the tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    ResearchInvestment,
    Governance,
    HealthInfrastructure,
    MultipleFactors,
    Unassigned,
}

impl Factor {
    pub const ASSIGNABLE: [Factor; 4] =
        [Factor::ResearchInvestment, Factor::Governance, Factor::HealthInfrastructure, Factor::MultipleFactors];

    pub fn name(self) -> &'static str {
        match self {
            Factor::ResearchInvestment => "Research-Investment",
            Factor::Governance => "Governance",
            Factor::HealthInfrastructure => "Health-Infrastructure",
            Factor::MultipleFactors => "Multiple-Factors",
            Factor::Unassigned => "Unassigned",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// residual > over → over-performing.
    pub over: f64,
    /// |residual| < band → as expected; residual < −band → under-performing.
    pub band: f64,
    /// Significance level for block coefficients.
    pub significance: f64,
    /// Blocks above this fraction of the maximum count as comparably strong.
    pub multi: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { over: 0.5, band: 0.3, significance: 0.1, multi: 0.7 }
    }
}

pub fn status_of(residual: f64, t: &Thresholds) -> Status {
    if residual > t.over {
        Status::OverPerforming
    } else if residual.abs() < t.band {
        Status::AsExpected
    } else if residual < -t.band {
        Status::UnderPerforming
    } else {
        Status::Unclassified
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairResidual {
    pub country: CountryCode,
    pub disease: DiseaseCategory,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassifiedPair {
    pub country: CountryCode,
    pub disease: DiseaseCategory,
    pub residual: f64,
    pub status: Status,
    pub factor: Factor,
    /// Set when the factor came from a tie broken by the fixed ordering.
    pub factor_tie: bool,
    pub cis_contribution: Option<f64>,
}

/// Applies the residual thresholds; factors start out unassigned.
pub fn classify(residuals: &[PairResidual], t: &Thresholds) -> Vec<ClassifiedPair> {
    residuals
        .iter()
        .map(|r| ClassifiedPair {
            country: r.country,
            disease: r.disease,
            residual: r.residual,
            status: status_of(r.residual, t),
            factor: Factor::Unassigned,
            factor_tie: false,
            cis_contribution: None,
        })
        .collect()
}

/// A predictor block tied to the factor it diagnoses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorBlock {
    pub factor: Factor,
    pub block: BlockSpec,
}

impl FactorBlock {
    /// Research investment, health infrastructure and governance policy blocks.
    pub fn policy() -> Vec<FactorBlock> {
        let factors = [Factor::ResearchInvestment, Factor::HealthInfrastructure, Factor::Governance];
        BlockSpec::policy().into_iter().zip(factors).map(|(block, factor)| FactorBlock { factor, block }).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockDiagnosis {
    /// (factor, mean |β| over significant members, number significant)
    pub blocks: Vec<(Factor, f64, usize)>,
    pub winner: Factor,
    pub multiple_factor_flag: bool,
}

/// Mean absolute significant coefficient per block and the resulting factor.
///
/// β̄_b averages |β_j| over members with p < `significance` (zero when none is
/// significant). The largest block wins (ties by factor order); when two or
/// more blocks exceed `multi`·max the result is `MultipleFactors`. With every
/// block at zero the factor is `Unassigned`.
pub fn limiting_factor(fit: &OlsFit, blocks: &[FactorBlock], t: &Thresholds) -> BlockDiagnosis {
    let mut scores = Vec::with_capacity(blocks.len());
    for fb in blocks {
        let sig: Vec<f64> = fb
            .block
            .members
            .iter()
            .filter_map(|m| fit.coefficient(m.name()))
            .filter(|c| c.p_value < t.significance)
            .map(|c| c.estimate.abs())
            .collect();
        let mean = if sig.is_empty() { 0.0 } else { sig.iter().sum::<f64>() / sig.len() as f64 };
        scores.push((fb.factor, mean, sig.len()));
    }
    let max = scores.iter().map(|s| s.1).fold(0.0, f64::max);
    if max <= 0.0 {
        return BlockDiagnosis { blocks: scores, winner: Factor::Unassigned, multiple_factor_flag: false };
    }
    let strong = scores.iter().filter(|s| s.1 > t.multi * max).count();
    let best = scores
        .iter()
        .filter(|s| s.1 == max)
        .map(|s| s.0)
        .min()
        .expect("max attained");
    let multiple = strong >= 2;
    BlockDiagnosis { blocks: scores, winner: if multiple { Factor::MultipleFactors } else { best }, multiple_factor_flag: multiple }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiseaseFit {
    pub disease: DiseaseCategory,
    pub fit: OlsFit,
    pub diagnosis: BlockDiagnosis,
    pub residuals: Vec<PairResidual>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DiseaseFits {
    pub fits: Vec<DiseaseFit>,
    /// Diseases skipped, with the reason.
    pub skipped: Vec<(DiseaseCategory, String)>,
}

/// Per-disease OLS of pair log-PBR on standardized block predictors plus
/// the two structural controls (log GDP, log population).
pub fn disease_fits(
    panel: &Panel,
    table: &PredictorTable,
    period: Period,
    blocks: &[FactorBlock],
    t: &Thresholds,
) -> Result<DiseaseFits> {
    let pbrs = pair_pbrs(panel, period)?;
    let mut by_disease: BTreeMap<DiseaseCategory, BTreeMap<CountryCode, f64>> = BTreeMap::new();
    for r in &pbrs.records {
        if let (Some(d), Some(v)) = (r.disease, r.log_pbr.value()) {
            by_disease.entry(d).or_default().insert(r.country, v);
        }
    }
    let mut wanted: Vec<Predictor> = blocks.iter().flat_map(|b| b.block.members.iter().copied()).collect();
    for c in [Predictor::LogGdp, Predictor::LogPopulation] {
        if !wanted.contains(&c) {
            wanted.push(c);
        }
    }
    let results: Vec<(DiseaseCategory, Result<DiseaseFit>)> = by_disease
        .into_par_iter()
        .map(|(d, resp)| {
            let res = (|| {
                let design = build_design(&resp, table, &wanted)?;
                let fit = ols(&design.y, &design.named_columns(&design.predictors), true)?;
                let diagnosis = limiting_factor(&fit, blocks, t);
                let residuals = design
                    .countries
                    .iter()
                    .zip(&fit.residuals)
                    .map(|(c, r)| PairResidual { country: *c, disease: d, residual: *r })
                    .collect();
                Ok(DiseaseFit { disease: d, fit, diagnosis, residuals })
            })();
            (d, res)
        })
        .collect();
    let mut out = DiseaseFits::default();
    for (d, r) in results {
        match r {
            Ok(f) => out.fits.push(f),
            Err(e) if matches!(e, Error::Singular(_) | Error::InvalidInput(_) | Error::Undefined(_)) => {
                out.skipped.push((d, e.to_string()))
            }
            Err(e) => return Err(e),
        }
    }
    if out.fits.is_empty() {
        return Err(Error::invalid("no disease had enough countries for a regression"));
    }
    Ok(out)
}

/// Classifies every fitted pair and gives under-performers their disease's limiting factor.
pub fn classify_fits(fits: &DiseaseFits, t: &Thresholds) -> Vec<ClassifiedPair> {
    let mut out = Vec::new();
    for f in &fits.fits {
        let mut pairs = classify(&f.residuals, t);
        for p in pairs.iter_mut().filter(|p| p.status == Status::UnderPerforming) {
            p.factor = f.diagnosis.winner;
        }
        out.extend(pairs);
    }
    out
}
