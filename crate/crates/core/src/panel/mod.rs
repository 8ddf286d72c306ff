//! Participation/burden panels keyed by (country, disease, year).
//!
//! A [`Panel`] owns its cells and a cache of marginal totals. Aggregated panels
//! reuse the same type: a dimension that has been summed away is `None` in
//! every [`CellKey`].

mod country;
mod disease;
mod ingest;
mod predictors;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};

pub use country::CountryCode;
pub use disease::DiseaseCategory;
pub use ingest::{detect_delimiter, emit_panel, ingest_panel, ColumnMapping, IngestOptions, IngestReport, RejectedRow};
pub use predictors::{
    ingest_predictors, BlockSpec, IncomeGroup, Predictor, PredictorTable, MAX_MISSING_FRACTION,
};

pub const MIN_YEAR: u16 = 2000;
pub const MAX_YEAR: u16 = 2024;

/// Anchor year for year bins.
pub const BIN_ANCHOR: u16 = MIN_YEAR;

/// Participant and DALY totals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Totals {
    pub participants: f64,
    pub dalys: f64,
}

impl Totals {
    pub fn new(participants: f64, dalys: f64) -> Self {
        Totals { participants, dalys }
    }

    pub fn add(&mut self, other: Totals) {
        self.participants += other.participants;
        self.dalys += other.dalys;
    }
}

impl std::ops::Add for Totals {
    type Output = Totals;
    fn add(mut self, rhs: Totals) -> Totals {
        Totals::add(&mut self, rhs);
        self
    }
}

/// One observation of participants and DALYs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PanelCell {
    pub country: CountryCode,
    pub disease: DiseaseCategory,
    pub year: u16,
    pub participants: f64,
    pub dalys: f64,
}

impl PanelCell {
    pub fn new(country: CountryCode, disease: DiseaseCategory, year: u16, participants: f64, dalys: f64) -> Self {
        PanelCell { country, disease, year, participants, dalys }
    }

    pub fn key(&self) -> CellKey {
        CellKey { country: Some(self.country), disease: Some(self.disease), year: Some(self.year) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CellKey {
    pub country: Option<CountryCode>,
    pub disease: Option<DiseaseCategory>,
    pub year: Option<u16>,
}

/// Inclusive year range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Period {
    pub start: u16,
    pub end: u16,
}

impl Period {
    pub fn new(start: u16, end: u16) -> Result<Self> {
        if start > end {
            return Err(Error::invalid(format!("period start {start} after end {end}")));
        }
        Ok(Period { start, end })
    }

    pub fn all() -> Self {
        Period { start: 0, end: u16::MAX }
    }

    pub fn contains(&self, year: u16) -> bool {
        (self.start..=self.end).contains(&year)
    }

    /// Cells without a year (year summed away) belong to every period.
    fn admits(&self, year: Option<u16>) -> bool {
        year.is_none_or(|y| self.contains(y))
    }
}

impl Default for Period {
    fn default() -> Self {
        Period::all()
    }
}

/// How the year dimension is treated by [`Panel::aggregate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YearKeep {
    Keep,
    /// Map each year to the start of its `w`-year bin (anchored at [`BIN_ANCHOR`]).
    Bin(u16),
    Drop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AggregateSpec {
    pub country: bool,
    pub disease: bool,
    pub year: YearKeep,
}

impl AggregateSpec {
    /// Country totals across all diseases and years.
    pub fn national() -> Self {
        AggregateSpec { country: true, disease: false, year: YearKeep::Drop }
    }

    /// Country-disease totals across years.
    pub fn pairs() -> Self {
        AggregateSpec { country: true, disease: true, year: YearKeep::Drop }
    }
}

pub fn bin_start(year: u16, width: u16) -> u16 {
    let offset = (year as i32 - BIN_ANCHOR as i32).div_euclid(width as i32) * width as i32;
    (BIN_ANCHOR as i32 + offset) as u16
}

/// Cached totals along every dimension combination used by the metrics.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Marginals {
    pub global: Totals,
    pub by_country: BTreeMap<CountryCode, Totals>,
    pub by_disease: BTreeMap<DiseaseCategory, Totals>,
    pub by_year: BTreeMap<u16, Totals>,
    pub by_disease_year: BTreeMap<(DiseaseCategory, u16), Totals>,
    pub by_country_year: BTreeMap<(CountryCode, u16), Totals>,
}

impl Marginals {
    fn compute(cells: &BTreeMap<CellKey, Totals>) -> Self {
        let mut m = Marginals::default();
        for (k, t) in cells {
            m.global.add(*t);
            if let Some(c) = k.country {
                m.by_country.entry(c).or_default().add(*t);
            }
            if let Some(d) = k.disease {
                m.by_disease.entry(d).or_default().add(*t);
            }
            if let Some(y) = k.year {
                m.by_year.entry(y).or_default().add(*t);
                if let Some(d) = k.disease {
                    m.by_disease_year.entry((d, y)).or_default().add(*t);
                }
                if let Some(c) = k.country {
                    m.by_country_year.entry((c, y)).or_default().add(*t);
                }
            }
        }
        m
    }
}

/// Validated, immutable panel with cached marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    cells: BTreeMap<CellKey, Totals>,
    marginals: Marginals,
}

impl Panel {
    /// Builds a panel from full (country, disease, year) cells. Duplicate keys are summed.
    pub fn from_cells(cells: impl IntoIterator<Item = PanelCell>) -> Result<Self> {
        Self::from_keyed(cells.into_iter().map(|c| (c.key(), Totals::new(c.participants, c.dalys))))
    }

    /// Builds a panel from keyed totals. Duplicate keys are summed.
    pub fn from_keyed(cells: impl IntoIterator<Item = (CellKey, Totals)>) -> Result<Self> {
        let mut map: BTreeMap<CellKey, Totals> = BTreeMap::new();
        for (k, t) in cells {
            if !(t.participants.is_finite() && t.participants >= 0.0) {
                return Err(Error::invalid(format!("participants must be finite and >= 0 at {k:?}")));
            }
            if !(t.dalys.is_finite() && t.dalys > 0.0) {
                return Err(Error::invalid(format!("dalys must be finite and > 0 at {k:?}")));
            }
            map.entry(k).or_default().add(t);
        }
        if map.is_empty() {
            return Err(Error::EmptyInput);
        }
        let marginals = Marginals::compute(&map);
        if marginals.global.participants <= 0.0 {
            return Err(Error::invalid("global participant total must be positive"));
        }
        Ok(Panel { cells: map, marginals })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &Totals)> {
        self.cells.iter()
    }

    pub fn get(&self, key: &CellKey) -> Option<Totals> {
        self.cells.get(key).copied()
    }

    pub fn marginals(&self) -> &Marginals {
        &self.marginals
    }

    pub fn global(&self) -> Totals {
        self.marginals.global
    }

    pub fn countries(&self) -> BTreeSet<CountryCode> {
        self.cells.keys().filter_map(|k| k.country).collect()
    }

    pub fn diseases(&self) -> BTreeSet<DiseaseCategory> {
        self.cells.keys().filter_map(|k| k.disease).collect()
    }

    pub fn years(&self) -> BTreeSet<u16> {
        self.cells.keys().filter_map(|k| k.year).collect()
    }

    /// Full cells; only meaningful when no dimension has been aggregated away.
    pub fn full_cells(&self) -> impl Iterator<Item = PanelCell> + '_ {
        self.cells.iter().filter_map(|(k, t)| {
            Some(PanelCell::new(k.country?, k.disease?, k.year?, t.participants, t.dalys))
        })
    }

    /// Recomputes every marginal from the cells and compares with the cache.
    pub fn marginals_consistent(&self, rel_tol: f64) -> bool {
        let fresh = Marginals::compute(&self.cells);
        let close = |a: &Totals, b: &Totals| {
            let c = |x: f64, y: f64| (x - y).abs() <= rel_tol * x.abs().max(y.abs()).max(1.0);
            c(a.participants, b.participants) && c(a.dalys, b.dalys)
        };
        fn all<K: Ord>(a: &BTreeMap<K, Totals>, b: &BTreeMap<K, Totals>, f: &dyn Fn(&Totals, &Totals) -> bool) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|((ka, va), (kb, vb))| ka == kb && f(va, vb))
        }
        let m = &self.marginals;
        close(&m.global, &fresh.global)
            && all(&m.by_country, &fresh.by_country, &close)
            && all(&m.by_disease, &fresh.by_disease, &close)
            && all(&m.by_year, &fresh.by_year, &close)
            && all(&m.by_disease_year, &fresh.by_disease_year, &close)
            && all(&m.by_country_year, &fresh.by_country_year, &close)
    }

    /// Sums cells over dropped dimensions and optionally bins years.
    pub fn aggregate(&self, spec: AggregateSpec) -> Result<Panel> {
        if let YearKeep::Bin(0) = spec.year {
            return Err(Error::invalid("bin width must be >= 1"));
        }
        if !spec.country && !spec.disease && spec.year == YearKeep::Drop {
            return Err(Error::invalid("aggregation must keep at least one dimension"));
        }
        let mapped = self.cells.iter().map(|(k, t)| {
            let key = CellKey {
                country: if spec.country { k.country } else { None },
                disease: if spec.disease { k.disease } else { None },
                year: match spec.year {
                    YearKeep::Keep => k.year,
                    YearKeep::Bin(w) => k.year.map(|y| bin_start(y, w)),
                    YearKeep::Drop => None,
                },
            };
            (key, *t)
        });
        Panel::from_keyed(mapped)
    }

    /// Restricts to cells whose year lies in `period`.
    pub fn restrict(&self, period: Period) -> Result<Panel> {
        Panel::from_keyed(self.cells.iter().filter(|(k, _)| period.admits(k.year)).map(|(k, t)| (*k, *t)))
    }

    /// Keeps cells for which `keep` returns true.
    pub fn filter(&self, keep: impl Fn(&CellKey) -> bool) -> Result<Panel> {
        Panel::from_keyed(self.cells.iter().filter(|(k, _)| keep(k)).map(|(k, t)| (*k, *t)))
    }

    /// Multiplies every participant count by `a` and every DALY by `b`.
    pub fn rescale(&self, a: f64, b: f64) -> Result<Panel> {
        Panel::from_keyed(self.cells.iter().map(|(k, t)| (*k, Totals::new(t.participants * a, t.dalys * b))))
    }

    /// (country, disease) totals summed over the years in `period`.
    pub fn pair_totals(&self, period: Period) -> BTreeMap<(CountryCode, DiseaseCategory), Totals> {
        let mut out: BTreeMap<(CountryCode, DiseaseCategory), Totals> = BTreeMap::new();
        for (k, t) in &self.cells {
            if let (Some(c), Some(d)) = (k.country, k.disease) {
                if period.admits(k.year) {
                    out.entry((c, d)).or_default().add(*t);
                }
            }
        }
        out
    }

    /// Per-disease totals over `period`.
    pub fn disease_totals(&self, period: Period) -> BTreeMap<DiseaseCategory, Totals> {
        let mut out: BTreeMap<DiseaseCategory, Totals> = BTreeMap::new();
        for (k, t) in &self.cells {
            if let Some(d) = k.disease {
                if period.admits(k.year) {
                    out.entry(d).or_default().add(*t);
                }
            }
        }
        out
    }

    /// Per-country totals over `period`.
    pub fn country_totals(&self, period: Period) -> BTreeMap<CountryCode, Totals> {
        let mut out: BTreeMap<CountryCode, Totals> = BTreeMap::new();
        for (k, t) in &self.cells {
            if let Some(c) = k.country {
                if period.admits(k.year) {
                    out.entry(c).or_default().add(*t);
                }
            }
        }
        out
    }

    /// Grand total over `period`.
    pub fn period_total(&self, period: Period) -> Totals {
        let mut out = Totals::default();
        for (k, t) in &self.cells {
            if period.admits(k.year) {
                out.add(*t);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> CountryCode {
        CountryCode::parse(s).unwrap()
    }

    fn cvd() -> DiseaseCategory {
        DiseaseCategory::parse("cardiovascular").unwrap()
    }

    #[test]
    fn single_cell_panel() {
        let p = Panel::from_cells([PanelCell::new(c("USA"), cvd(), 2010, 100.0, 5000.0)]).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.global().participants, 100.0);
        assert!(p.marginals_consistent(1e-9));
    }

    #[test]
    fn aggregate_over_years_sums() {
        let p = Panel::from_cells([
            PanelCell::new(c("USA"), cvd(), 2010, 1.0, 10.0),
            PanelCell::new(c("USA"), cvd(), 2011, 2.0, 10.0),
        ])
        .unwrap();
        let a = p.aggregate(AggregateSpec::pairs()).unwrap();
        assert_eq!(a.len(), 1);
        let (_, t) = a.cells().next().unwrap();
        assert_eq!(t.participants, 3.0);
    }

    #[test]
    fn two_year_bins() {
        let cells = (2000..=2003).map(|y| PanelCell::new(c("USA"), cvd(), y, 1.0, 1.0));
        let p = Panel::from_cells(cells).unwrap();
        let b = p.aggregate(AggregateSpec { country: true, disease: true, year: YearKeep::Bin(2) }).unwrap();
        assert_eq!(b.years().into_iter().collect::<Vec<_>>(), vec![2000, 2002]);
        assert_eq!(bin_start(2024, 2), 2024);
        assert_eq!(bin_start(1999, 2), 1998);
    }

    #[test]
    fn rejects_empty_and_zero_participation_panels() {
        assert!(matches!(Panel::from_cells([]), Err(Error::EmptyInput)));
        assert!(Panel::from_cells([PanelCell::new(c("USA"), cvd(), 2010, 0.0, 5.0)]).is_err());
        assert!(Panel::from_cells([PanelCell::new(c("USA"), cvd(), 2010, 1.0, 0.0)]).is_err());
    }

    #[test]
    fn aggregate_rejects_zero_width_and_empty_keep() {
        let p = Panel::from_cells([PanelCell::new(c("USA"), cvd(), 2010, 1.0, 1.0)]).unwrap();
        assert!(p.aggregate(AggregateSpec { country: true, disease: true, year: YearKeep::Bin(0) }).is_err());
        assert!(p.aggregate(AggregateSpec { country: false, disease: false, year: YearKeep::Drop }).is_err());
    }
}
