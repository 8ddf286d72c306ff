use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{pbr_table, PbrRecord, UnitKind};
use crate::panel::{bin_start, AggregateSpec, Panel, Period};

/// Normalized Theil-T: (1/N) Σ (x/μ) ln(x/μ).
pub fn theil(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::invalid("Theil index needs finite positive values"));
    }
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let t = values.iter().map(|x| (x / mu) * (x / mu).ln()).sum::<f64>() / n;
    Ok(t.max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupTerm {
    pub group: String,
    pub n: usize,
    pub mean: f64,
    /// Income share s_g = N_g μ_g / (N μ).
    pub weight: f64,
    pub theil: f64,
    pub between_term: f64,
    pub within_term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheilDecomposition {
    pub grouping: UnitKind,
    pub total: f64,
    pub between: f64,
    pub within: f64,
    pub group_terms: Vec<GroupTerm>,
    /// Records left out because their PBR was zero.
    pub excluded_zero: usize,
}

impl TheilDecomposition {
    pub fn between_share(&self) -> f64 {
        if self.total > 0.0 {
            self.between / self.total
        } else {
            0.0
        }
    }

    pub fn within_share(&self) -> f64 {
        if self.total > 0.0 {
            self.within / self.total
        } else {
            0.0
        }
    }
}

/// Between/within split of Theil-T for `values` partitioned by `labels`.
///
/// between = Σ s_g ln(μ_g/μ), within = Σ s_g T_g with s_g = N_g μ_g / (N μ).
pub fn theil_split(values: &[f64], labels: &[String]) -> Result<(f64, Vec<GroupTerm>)> {
    if values.len() != labels.len() {
        return Err(Error::invalid("values and group labels differ in length"));
    }
    let total = theil(values)?;
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (v, g) in values.iter().zip(labels) {
        groups.entry(g.as_str()).or_default().push(*v);
    }
    if groups.len() < 2 {
        return Err(Error::invalid("Theil decomposition needs at least two groups"));
    }
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let mut terms = Vec::with_capacity(groups.len());
    for (g, xs) in groups {
        let ng = xs.len() as f64;
        let mg = xs.iter().sum::<f64>() / ng;
        let s = ng * mg / (n * mu);
        let tg = theil(&xs)?;
        terms.push(GroupTerm {
            group: g.to_string(),
            n: xs.len(),
            mean: mg,
            weight: s,
            theil: tg,
            between_term: s * (mg / mu).ln(),
            within_term: s * tg,
        });
    }
    Ok((total, terms))
}

/// Theil decomposition of PBR records grouped by disease or country.
pub fn theil_decompose(records: &[PbrRecord], grouping: UnitKind) -> Result<TheilDecomposition> {
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut excluded_zero = 0;
    for r in records {
        if r.pbr <= 0.0 {
            excluded_zero += 1;
            continue;
        }
        let label = match grouping {
            UnitKind::Country => r.country.to_string(),
            UnitKind::Disease => match r.disease {
                Some(d) => d.name().to_string(),
                None => return Err(Error::invalid("disease grouping needs disease-level records")),
            },
        };
        values.push(r.pbr);
        labels.push(label);
    }
    let (total, group_terms) = theil_split(&values, &labels)?;
    let between = group_terms.iter().map(|g| g.between_term).sum();
    let within = group_terms.iter().map(|g| g.within_term).sum();
    Ok(TheilDecomposition { grouping, total, between, within, group_terms, excluded_zero })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinnedTheil {
    pub bin_start: u16,
    pub bin_end: u16,
    pub decomposition: TheilDecomposition,
}

/// Theil decomposition of pair PBRs within each `width`-year bin.
pub fn theil_by_bins(panel: &Panel, grouping: UnitKind, width: u16) -> Result<Vec<BinnedTheil>> {
    if width == 0 {
        return Err(Error::invalid("bin width must be >= 1"));
    }
    let starts: std::collections::BTreeSet<u16> = panel.years().into_iter().map(|y| bin_start(y, width)).collect();
    let mut out = Vec::new();
    for s in starts {
        let period = Period::new(s, s + width - 1)?;
        let pairs = panel.restrict(period)?.aggregate(AggregateSpec::pairs())?;
        let decomposition = theil_decompose(&pbr_table(&pairs).records, grouping)?;
        out.push(BinnedTheil { bin_start: s, bin_end: s + width - 1, decomposition });
    }
    Ok(out)
}
