use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gini, weighted_gini};
use crate::error::{Error, Result};
use crate::panel::{CountryCode, DiseaseCategory, Panel, Period, Totals};
use crate::stats::{percentile, resample_indices, BootstrapSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Equal,
    ParticipantWeighted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Disease,
    Country,
}

/// A disease or a country, the unit removed in leave-out analyses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Disease(DiseaseCategory),
    Country(CountryCode),
}

impl Unit {
    pub fn kind(self) -> UnitKind {
        match self {
            Unit::Disease(_) => UnitKind::Disease,
            Unit::Country(_) => UnitKind::Country,
        }
    }

    pub fn label(self) -> String {
        match self {
            Unit::Disease(d) => d.name().to_string(),
            Unit::Country(c) => c.to_string(),
        }
    }

    fn matches(self, pair: &Pair) -> bool {
        match self {
            Unit::Disease(d) => pair.disease == d,
            Unit::Country(c) => pair.country == c,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Pair {
    country: CountryCode,
    disease: DiseaseCategory,
    t: Totals,
}

fn pairs_of(panel: &Panel, period: Period) -> Vec<Pair> {
    panel
        .pair_totals(period)
        .into_iter()
        .map(|((country, disease), t)| Pair { country, disease, t })
        .collect()
}

/// Gini of pair PBRs over a multiset of pairs.
///
/// PBRs are derived from the disease totals of the pairs passed in, so removing
/// a country changes the remaining shares. Pairs of diseases without
/// participants are skipped. `None` when the Gini is undefined.
fn gini_over<'a>(pairs: impl Iterator<Item = &'a Pair> + Clone, weighting: Weighting) -> Option<f64> {
    let mut dis: BTreeMap<DiseaseCategory, Totals> = BTreeMap::new();
    for p in pairs.clone() {
        dis.entry(p.disease).or_default().add(p.t);
    }
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for p in pairs {
        let d = dis[&p.disease];
        if d.participants <= 0.0 {
            continue;
        }
        values.push((p.t.participants / d.participants) / (p.t.dalys / d.dalys));
        weights.push(p.t.participants);
    }
    match weighting {
        Weighting::Equal => gini(&values).ok(),
        Weighting::ParticipantWeighted => weighted_gini(&values, &weights).ok(),
    }
}

/// Global Gini over country-disease PBRs in `period`.
pub fn pair_gini(panel: &Panel, period: Period, weighting: Weighting) -> Result<f64> {
    let pairs = pairs_of(panel, period);
    gini_over(pairs.iter(), weighting).ok_or_else(|| Error::undefined("global Gini undefined"))
}

/// Global Gini after dropping every pair that involves one of `exclude`.
pub fn gini_excluding(panel: &Panel, period: Period, exclude: &[Unit], weighting: Weighting) -> Result<f64> {
    let pairs = pairs_of(panel, period);
    let kept: Vec<&Pair> = pairs.iter().filter(|p| !exclude.iter().any(|u| u.matches(p))).collect();
    if kept.is_empty() {
        return Err(Error::invalid("exclusion removes every pair"));
    }
    gini_over(kept.iter().copied(), weighting).ok_or_else(|| Error::undefined("Gini undefined after exclusion"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CisRecord {
    pub unit: Unit,
    pub cis_percent: f64,
    pub gini_all: f64,
    pub gini_without: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub weighting: Weighting,
}

/// Values of G_all below this are treated as perfect equality (CIS = 0).
const GINI_ZERO: f64 = 1e-12;

fn cis_value(all: f64, without: f64) -> f64 {
    if all < GINI_ZERO {
        0.0
    } else {
        (all - without) / all * 100.0
    }
}

fn cis_of(pairs: &[&Pair], units: &[Unit], weighting: Weighting) -> Option<(f64, Vec<(f64, f64)>)> {
    let all = gini_over(pairs.iter().copied(), weighting)?;
    let mut out = Vec::with_capacity(units.len());
    for u in units {
        let rest = pairs.iter().copied().filter(|p| !u.matches(p));
        let without = if rest.clone().next().is_none() { None } else { gini_over(rest, weighting) };
        let without = without?;
        out.push((cis_value(all, without), without));
    }
    Some((all, out))
}

/// CIS for each of `units`, with optional percentile bootstrap over pairs.
///
/// A replicate where a Gini is undefined is skipped; more than 10% skipped is
/// an error. The reported interval is widened to contain the point estimate.
pub fn cis_all(
    panel: &Panel,
    period: Period,
    units: &[Unit],
    weighting: Weighting,
    bootstrap: Option<&BootstrapSpec>,
) -> Result<Vec<CisRecord>> {
    let pairs = pairs_of(panel, period);
    for u in units {
        if !pairs.iter().any(|p| u.matches(p)) {
            return Err(Error::invalid(format!("{} is absent from the panel", u.label())));
        }
    }
    let refs: Vec<&Pair> = pairs.iter().collect();
    let (all, point) = cis_of(&refs, units, weighting).ok_or_else(|| Error::undefined("CIS undefined on the panel"))?;
    let mut records: Vec<CisRecord> = units
        .iter()
        .zip(&point)
        .map(|(u, (c, w))| CisRecord {
            unit: *u,
            cis_percent: *c,
            gini_all: all,
            gini_without: *w,
            ci_low: None,
            ci_high: None,
            weighting,
        })
        .collect();

    if let Some(spec) = bootstrap {
        spec.validate()?;
        let reps: Vec<Option<Vec<f64>>> = (0..spec.n_iterations as u64)
            .into_par_iter()
            .map(|b| {
                let idx = resample_indices(spec.seed, "cis", b, pairs.len());
                let sample: Vec<&Pair> = idx.iter().map(|&i| &pairs[i]).collect();
                cis_of(&sample, units, weighting).map(|(_, v)| v.into_iter().map(|x| x.0).collect())
            })
            .collect();
        let ok: Vec<Vec<f64>> = reps.into_iter().flatten().collect();
        let skipped = spec.n_iterations - ok.len();
        if skipped as f64 > 0.1 * spec.n_iterations as f64 {
            return Err(Error::Numerical(format!("CIS undefined on {skipped} of {} resamples", spec.n_iterations)));
        }
        for (j, rec) in records.iter_mut().enumerate() {
            let mut col: Vec<f64> = ok.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            let lo = percentile(&col, spec.low_percentile);
            let hi = percentile(&col, spec.high_percentile);
            rec.ci_low = Some(lo.min(rec.cis_percent));
            rec.ci_high = Some(hi.max(rec.cis_percent));
        }
    }
    Ok(records)
}

/// CIS of a single unit.
pub fn cis(
    panel: &Panel,
    period: Period,
    target: Unit,
    weighting: Weighting,
    bootstrap: Option<&BootstrapSpec>,
) -> Result<CisRecord> {
    Ok(cis_all(panel, period, &[target], weighting, bootstrap)?.remove(0))
}

/// Leave-one-pair-out CIS for every country-disease pair, in (country, disease) order.
pub fn pair_cis(panel: &Panel, period: Period, weighting: Weighting) -> Result<Vec<((CountryCode, DiseaseCategory), f64)>> {
    let pairs = pairs_of(panel, period);
    let all = gini_over(pairs.iter(), weighting).ok_or_else(|| Error::undefined("global Gini undefined"))?;
    Ok((0..pairs.len())
        .into_par_iter()
        .map(|i| {
            let rest = pairs.iter().enumerate().filter(move |(j, _)| *j != i).map(|(_, p)| p);
            let without = gini_over(rest, weighting).unwrap_or(all);
            ((pairs[i].country, pairs[i].disease), cis_value(all, without))
        })
        .collect())
}

pub fn units_of(panel: &Panel, kind: UnitKind) -> Vec<Unit> {
    match kind {
        UnitKind::Disease => panel.diseases().into_iter().map(Unit::Disease).collect(),
        UnitKind::Country => panel.countries().into_iter().map(Unit::Country).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ranking {
    Cis,
    ParticipantVolume,
}

/// Units of `kind` ordered from the largest contributor down (ties by unit order).
pub fn rank_units(panel: &Panel, period: Period, kind: UnitKind, ranking: Ranking, weighting: Weighting) -> Result<Vec<Unit>> {
    let units = units_of(panel, kind);
    let score: Vec<f64> = match ranking {
        Ranking::Cis => cis_all(panel, period, &units, weighting, None)?.iter().map(|r| r.cis_percent).collect(),
        Ranking::ParticipantVolume => {
            let pairs = pairs_of(panel, period);
            units.iter().map(|u| pairs.iter().filter(|p| u.matches(p)).map(|p| p.t.participants).sum()).collect()
        }
    };
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&i, &j| score[j].total_cmp(&score[i]).then(units[i].cmp(&units[j])));
    Ok(order.into_iter().map(|i| units[i]).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeaveOut {
    pub gini_before: f64,
    pub gini_after: f64,
    pub excluded: Vec<Unit>,
}

/// Global Gini before and after removing the top `floor(top_fraction × units)` units.
pub fn leave_out_gini(
    panel: &Panel,
    period: Period,
    kind: UnitKind,
    ranking: Ranking,
    top_fraction: f64,
    weighting: Weighting,
) -> Result<LeaveOut> {
    if !(top_fraction > 0.0 && top_fraction < 1.0) {
        return Err(Error::invalid("top_fraction must lie in (0, 1)"));
    }
    let ranked = rank_units(panel, period, kind, ranking, weighting)?;
    let k = (top_fraction * ranked.len() as f64).floor() as usize;
    let excluded = ranked[..k].to_vec();
    let gini_before = pair_gini(panel, period, weighting)?;
    let gini_after = gini_excluding(panel, period, &excluded, weighting)?;
    Ok(LeaveOut { gini_before, gini_after, excluded })
}
