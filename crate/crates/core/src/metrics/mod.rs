//! Participation-to-burden ratios, specialization, Gini/Lorenz, CIS and
//! burden-participation alignment.

mod alignment;
mod cis;
mod gini;

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

pub use alignment::{alignment_by_income, alignment_regression, AlignmentFit};
pub use cis::{
    cis, cis_all, gini_excluding, leave_out_gini, pair_cis, pair_gini, rank_units, units_of, CisRecord, LeaveOut, Ranking, Unit,
    UnitKind, Weighting,
};
pub use gini::{gini, lorenz, lorenz_curve, weighted_gini, LorenzCurve};

use crate::error::{Error, Result};
use crate::panel::{AggregateSpec, CellKey, CountryCode, DiseaseCategory, Panel, Period, Totals};

/// Natural log of a PBR, or a marker for pairs with no participants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogPbr {
    Finite(f64),
    ZeroParticipation,
}

impl LogPbr {
    pub fn of(pbr: f64) -> Self {
        if pbr > 0.0 {
            LogPbr::Finite(pbr.ln())
        } else {
            LogPbr::ZeroParticipation
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            LogPbr::Finite(v) => Some(v),
            LogPbr::ZeroParticipation => None,
        }
    }
}

impl Serialize for LogPbr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LogPbr::Finite(v) => s.serialize_f64(*v),
            LogPbr::ZeroParticipation => s.serialize_str("zero_participation"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PbrRecord {
    pub country: CountryCode,
    pub disease: Option<DiseaseCategory>,
    pub year: Option<u16>,
    pub participants: f64,
    pub dalys: f64,
    pub pbr: f64,
    pub log_pbr: LogPbr,
}

impl PbrRecord {
    fn new(key: &CellKey, country: CountryCode, t: Totals, pbr: f64) -> Self {
        PbrRecord {
            country,
            disease: key.disease,
            year: key.year,
            participants: t.participants,
            dalys: t.dalys,
            pbr,
            log_pbr: LogPbr::of(pbr),
        }
    }
}

/// PBR records plus the keys whose reference totals had no participants.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PbrTable {
    pub records: Vec<PbrRecord>,
    pub excluded: Vec<CellKey>,
}

impl PbrTable {
    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.pbr).collect()
    }

    /// Records with pbr = 0 (dropped by log-based analyses).
    pub fn zero_participation(&self) -> usize {
        self.records.iter().filter(|r| r.pbr == 0.0).count()
    }
}

/// PBR for every cell of `panel` at its current resolution.
///
/// Each cell is normalized by the totals of all cells sharing its (disease,
/// year) key, so a pair-level panel gives period PBRs, a national panel gives
/// national PBRs, and an unaggregated panel gives per-year PBRs.
pub fn pbr_table(panel: &Panel) -> PbrTable {
    let mut reference: BTreeMap<(Option<DiseaseCategory>, Option<u16>), Totals> = BTreeMap::new();
    for (k, t) in panel.cells() {
        reference.entry((k.disease, k.year)).or_default().add(*t);
    }
    let mut out = PbrTable::default();
    for (k, t) in panel.cells() {
        let Some(country) = k.country else {
            out.excluded.push(*k);
            continue;
        };
        let r = reference[&(k.disease, k.year)];
        if r.participants <= 0.0 {
            out.excluded.push(*k);
            continue;
        }
        let pbr = (t.participants / r.participants) / (t.dalys / r.dalys);
        out.records.push(PbrRecord::new(k, country, *t, pbr));
    }
    out
}

/// Country-disease PBRs over `period`.
pub fn pair_pbrs(panel: &Panel, period: Period) -> Result<PbrTable> {
    Ok(pbr_table(&panel.restrict(period)?.aggregate(AggregateSpec::pairs())?))
}

/// National (all-disease) PBRs over `period`.
pub fn national_pbrs(panel: &Panel, period: Period) -> Result<PbrTable> {
    Ok(pbr_table(&panel.restrict(period)?.aggregate(AggregateSpec::national())?))
}

fn shares(panel: &Panel, country: CountryCode, disease: Option<DiseaseCategory>, period: Period) -> Result<(Totals, Totals)> {
    let p = panel.restrict(period)?;
    let mut own = Totals::default();
    let mut reference = Totals::default();
    for (k, t) in p.cells() {
        if disease.is_some() && k.disease != disease {
            continue;
        }
        reference.add(*t);
        if k.country == Some(country) {
            own.add(*t);
        }
    }
    Ok((own, reference))
}

/// PBR of one country for one disease (or all diseases when `disease` is `None`).
///
/// An absent cell has no burden, so the ratio is undefined and an error is returned.
pub fn pbr(panel: &Panel, country: CountryCode, disease: Option<DiseaseCategory>, period: Period) -> Result<PbrRecord> {
    let (own, reference) = shares(panel, country, disease, period)?;
    if own.dalys <= 0.0 {
        return Err(Error::undefined(format!("no burden recorded for {country} in the period")));
    }
    if reference.participants <= 0.0 || reference.dalys <= 0.0 {
        return Err(Error::undefined("reference totals have no participants or burden"));
    }
    let pbr = (own.participants / reference.participants) / (own.dalys / reference.dalys);
    let key = CellKey { country: Some(country), disease, year: None };
    Ok(PbrRecord::new(&key, country, own, pbr))
}

/// Within-country PBR variant: (P_cd / P_c) / (B_cd / B_c).
///
/// Normalizes by the country's own totals instead of the disease's global
/// totals. It is not algebraically equal to [`pbr`] in general.
pub fn pbr_within_country(panel: &Panel, country: CountryCode, disease: DiseaseCategory, period: Period) -> Result<f64> {
    let pairs = panel.pair_totals(period);
    let cell = pairs
        .get(&(country, disease))
        .ok_or_else(|| Error::undefined(format!("no burden recorded for {country} / {disease}")))?;
    let nat = pairs.iter().filter(|((c, _), _)| *c == country).fold(Totals::default(), |mut a, (_, t)| {
        a.add(*t);
        a
    });
    if nat.participants <= 0.0 {
        return Err(Error::undefined(format!("{country} has no participants in the period")));
    }
    Ok((cell.participants / nat.participants) / (cell.dalys / nat.dalys))
}

/// Specialization index (P_cd / P_c) / (P_d / P).
pub fn specialization_index(panel: &Panel, country: CountryCode, disease: DiseaseCategory, period: Period) -> Result<f64> {
    let nat = panel.country_totals(period).get(&country).copied().unwrap_or_default();
    if nat.participants <= 0.0 {
        return Err(Error::undefined(format!("{country} has no participants in the period")));
    }
    let dis = panel.disease_totals(period).get(&disease).copied().unwrap_or_default();
    if dis.participants <= 0.0 {
        return Err(Error::undefined(format!("{disease} has no participants in the period")));
    }
    let global = panel.period_total(period);
    let pcd = panel.pair_totals(period).get(&(country, disease)).map_or(0.0, |t| t.participants);
    Ok((pcd / nat.participants) / (dis.participants / global.participants))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SiRecord {
    pub country: CountryCode,
    pub disease: DiseaseCategory,
    pub si: f64,
}

/// SI for every (country with participants) × (disease with participants).
pub fn si_table(panel: &Panel, period: Period) -> Vec<SiRecord> {
    let nat = panel.country_totals(period);
    let dis = panel.disease_totals(period);
    let global = panel.period_total(period).participants;
    let pairs = panel.pair_totals(period);
    let mut out = Vec::new();
    for (c, ct) in nat.iter().filter(|(_, t)| t.participants > 0.0) {
        for (d, dt) in dis.iter().filter(|(_, t)| t.participants > 0.0) {
            let pcd = pairs.get(&(*c, *d)).map_or(0.0, |t| t.participants);
            out.push(SiRecord { country: *c, disease: *d, si: (pcd / ct.participants) / (dt.participants / global) });
        }
    }
    out
}
