//! Country-level structural indicators.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ingest::detect_delimiter;
use super::CountryCode;
use crate::error::{Error, Result};

/// Predictors missing for more than this fraction of countries are flagged for exclusion.
pub const MAX_MISSING_FRACTION: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    LogGdp,
    LogPopulation,
    RdExpenditure,
    LogPublications,
    TotalCitations,
    LogHealthExp,
    HospitalBeds,
    Hospitals,
    #[serde(rename = "doctors_per_10k")]
    DoctorsPer10k,
    Hdi,
    DemocracyIndex,
    LogPublicationsPerCapita,
    HospitalsPerCapita,
    HospitalBedsPerCapita,
    LogHealthExpPerCapita,
    LogGdpPerCapita,
}

impl Predictor {
    pub const ALL: [Predictor; 16] = [
        Predictor::LogGdp,
        Predictor::LogPopulation,
        Predictor::RdExpenditure,
        Predictor::LogPublications,
        Predictor::TotalCitations,
        Predictor::LogHealthExp,
        Predictor::HospitalBeds,
        Predictor::Hospitals,
        Predictor::DoctorsPer10k,
        Predictor::Hdi,
        Predictor::DemocracyIndex,
        Predictor::LogPublicationsPerCapita,
        Predictor::HospitalsPerCapita,
        Predictor::HospitalBedsPerCapita,
        Predictor::LogHealthExpPerCapita,
        Predictor::LogGdpPerCapita,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Predictor::LogGdp => "log_gdp",
            Predictor::LogPopulation => "log_population",
            Predictor::RdExpenditure => "rd_expenditure",
            Predictor::LogPublications => "log_publications",
            Predictor::TotalCitations => "total_citations",
            Predictor::LogHealthExp => "log_health_exp",
            Predictor::HospitalBeds => "hospital_beds",
            Predictor::Hospitals => "hospitals",
            Predictor::DoctorsPer10k => "doctors_per_10k",
            Predictor::Hdi => "hdi",
            Predictor::DemocracyIndex => "democracy_index",
            Predictor::LogPublicationsPerCapita => "log_publications_per_capita",
            Predictor::HospitalsPerCapita => "hospitals_per_capita",
            Predictor::HospitalBedsPerCapita => "hospital_beds_per_capita",
            Predictor::LogHealthExpPerCapita => "log_health_exp_per_capita",
            Predictor::LogGdpPerCapita => "log_gdp_per_capita",
        }
    }
}

impl FromStr for Predictor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Predictor::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown predictor `{}`", s.trim())))
    }
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IncomeGroup {
    High,
    UpperMiddle,
    LowerMiddle,
    Low,
}

impl IncomeGroup {
    pub const ALL: [IncomeGroup; 4] =
        [IncomeGroup::High, IncomeGroup::UpperMiddle, IncomeGroup::LowerMiddle, IncomeGroup::Low];
}

impl FromStr for IncomeGroup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "high" | "highincome" | "hic" => Ok(IncomeGroup::High),
            "uppermiddle" | "uppermiddleincome" | "umic" => Ok(IncomeGroup::UpperMiddle),
            "lowermiddle" | "lowermiddleincome" | "lmic" => Ok(IncomeGroup::LowerMiddle),
            "low" | "lowincome" | "lic" => Ok(IncomeGroup::Low),
            _ => Err(Error::invalid(format!("unknown income group `{}`", s.trim()))),
        }
    }
}

impl fmt::Display for IncomeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IncomeGroup::High => "High",
            IncomeGroup::UpperMiddle => "UpperMiddle",
            IncomeGroup::LowerMiddle => "LowerMiddle",
            IncomeGroup::Low => "Low",
        })
    }
}

/// Named, ordered group of predictors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub name: String,
    pub members: Vec<Predictor>,
}

impl BlockSpec {
    pub fn new(name: impl Into<String>, members: impl IntoIterator<Item = Predictor>) -> Self {
        BlockSpec { name: name.into(), members: members.into_iter().collect() }
    }

    /// Checks that blocks are non-empty and pairwise disjoint.
    pub fn validate(blocks: &[BlockSpec]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for b in blocks {
            if b.members.is_empty() {
                return Err(Error::invalid(format!("block `{}` has no members", b.name)));
            }
            for m in &b.members {
                if !seen.insert(*m) {
                    return Err(Error::invalid(format!("predictor `{m}` appears in more than one block")));
                }
            }
        }
        Ok(())
    }

    /// Structural blocks: economic, research, health, social.
    pub fn structural() -> Vec<BlockSpec> {
        use Predictor::*;
        vec![
            BlockSpec::new("Economic", [LogGdp, LogPopulation]),
            BlockSpec::new("Research", [RdExpenditure, LogPublications, TotalCitations]),
            BlockSpec::new("Health", [LogHealthExp, HospitalBeds, Hospitals, DoctorsPer10k]),
            BlockSpec::new("Social", [Hdi, DemocracyIndex]),
        ]
    }

    /// Policy-relevant blocks on per-capita measures.
    pub fn policy() -> Vec<BlockSpec> {
        use Predictor::*;
        vec![
            BlockSpec::new("Research_Investment", [RdExpenditure, LogPublicationsPerCapita]),
            BlockSpec::new(
                "Health_Infrastructure",
                [HospitalBedsPerCapita, DoctorsPer10k, HospitalsPerCapita, LogHealthExpPerCapita],
            ),
            BlockSpec::new("Governance", [Hdi, DemocracyIndex]),
        ]
    }
}

/// Country-level predictors with a missingness mask.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PredictorTable {
    countries: Vec<CountryCode>,
    columns: BTreeMap<Predictor, Vec<Option<f64>>>,
    income: Vec<Option<IncomeGroup>>,
}

impl PredictorTable {
    /// Builds a table from aligned columns. `countries` must be unique.
    pub fn new(
        countries: Vec<CountryCode>,
        columns: BTreeMap<Predictor, Vec<Option<f64>>>,
        income: Vec<Option<IncomeGroup>>,
    ) -> Result<Self> {
        let n = countries.len();
        if countries.iter().collect::<BTreeSet<_>>().len() != n {
            return Err(Error::invalid("duplicate country in predictor table"));
        }
        if income.len() != n || columns.values().any(|c| c.len() != n) {
            return Err(Error::invalid("predictor columns must align with the country list"));
        }
        if columns.values().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("predictor values must be finite"));
        }
        Ok(PredictorTable { countries, columns, income })
    }

    pub fn countries(&self) -> &[CountryCode] {
        &self.countries
    }

    pub fn len(&self) -> usize {
        self.countries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.countries.is_empty()
    }

    pub fn predictors(&self) -> impl Iterator<Item = Predictor> + '_ {
        self.columns.keys().copied()
    }

    pub fn column(&self, p: Predictor) -> Option<&[Option<f64>]> {
        self.columns.get(&p).map(|v| v.as_slice())
    }

    pub fn row_of(&self, country: CountryCode) -> Option<usize> {
        self.countries.iter().position(|c| *c == country)
    }

    pub fn value(&self, country: CountryCode, p: Predictor) -> Option<f64> {
        let i = self.row_of(country)?;
        self.columns.get(&p)?[i]
    }

    pub fn income_group(&self, country: CountryCode) -> Option<IncomeGroup> {
        self.income[self.row_of(country)?]
    }

    pub fn income_groups(&self) -> &[Option<IncomeGroup>] {
        &self.income
    }

    /// Missingness mask for `p` (true = missing).
    pub fn missing_mask(&self, p: Predictor) -> Option<Vec<bool>> {
        self.column(p).map(|c| c.iter().map(Option::is_none).collect())
    }

    pub fn missing_fraction(&self, p: Predictor) -> Option<f64> {
        let col = self.column(p)?;
        if col.is_empty() {
            return Some(0.0);
        }
        Some(col.iter().filter(|v| v.is_none()).count() as f64 / col.len() as f64)
    }

    /// Predictors flagged for exclusion (more than half the countries missing).
    pub fn excluded_predictors(&self) -> Vec<Predictor> {
        self.predictors()
            .filter(|p| self.missing_fraction(*p).unwrap_or(0.0) > MAX_MISSING_FRACTION)
            .collect()
    }

    /// Replaces a column (or adds it).
    pub fn with_column(mut self, p: Predictor, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != self.countries.len() {
            return Err(Error::invalid("column length does not match country count"));
        }
        self.columns.insert(p, values);
        Ok(self)
    }

    pub fn without_column(mut self, p: Predictor) -> Self {
        self.columns.remove(&p);
        self
    }

    /// Restricts to the given countries (in table order).
    pub fn select_countries(&self, keep: &BTreeSet<CountryCode>) -> PredictorTable {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep.contains(&self.countries[i])).collect();
        PredictorTable {
            countries: idx.iter().map(|&i| self.countries[i]).collect(),
            columns: self.columns.iter().map(|(p, c)| (*p, idx.iter().map(|&i| c[i]).collect())).collect(),
            income: idx.iter().map(|&i| self.income[i]).collect(),
        }
    }

    /// Rows in the given order (indices may repeat, as in a bootstrap resample).
    pub fn take_rows(&self, rows: &[usize]) -> PredictorTable {
        PredictorTable {
            countries: rows.iter().map(|&i| self.countries[i]).collect(),
            columns: self.columns.iter().map(|(p, c)| (*p, rows.iter().map(|&i| c[i]).collect())).collect(),
            income: rows.iter().map(|&i| self.income[i]).collect(),
        }
    }

    /// Dense column values; errors if any entry is missing.
    pub fn dense_column(&self, p: Predictor) -> Result<Vec<f64>> {
        let col = self.column(p).ok_or_else(|| Error::invalid(format!("predictor `{p}` not in table")))?;
        col.iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::invalid(format!("`{p}` missing for {}", self.countries[i]))))
            .collect()
    }
}

fn is_missing(field: &str) -> bool {
    let t = field.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") || t.eq_ignore_ascii_case("null")
}

struct Row<'a> {
    headers: &'a BTreeMap<String, usize>,
    record: &'a csv::StringRecord,
    line: u64,
}

impl Row<'_> {
    fn get(&self, name: &str) -> Result<Option<f64>> {
        let Some(&i) = self.headers.get(name) else { return Ok(None) };
        let field = &self.record[i];
        if is_missing(field) {
            return Ok(None);
        }
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| Error::Row { line: self.line, message: format!("non-numeric {name} `{}`", field.trim()) })?;
        if !v.is_finite() {
            return Err(Error::Row { line: self.line, message: format!("non-finite {name}") });
        }
        Ok(Some(v))
    }

    fn ln(&self, name: &str, v: f64) -> Result<f64> {
        if v <= 0.0 {
            return Err(Error::Row { line: self.line, message: format!("{name} must be positive for log transform, got {v}") });
        }
        Ok(v.ln())
    }
}

/// Reads a country predictor table.
///
/// Raw columns (`gdp`, `population`, `publications`, `health_exp`, `hospitals`,
/// `hospital_beds`, ...) are transformed into the analysis predictors; a
/// derived column present in the input (e.g. `log_gdp`) takes precedence over
/// its computed form. Per-capita values are ratios to population, logged where
/// the predictor name says so. Empty, `NA` and `NaN` fields are missing.
pub fn ingest_predictors<R: Read>(mut source: R, delimiter: Option<u8>) -> Result<PredictorTable> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    if text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let delimiter = delimiter.unwrap_or_else(|| detect_delimiter(text.lines().next().unwrap_or("")));
    let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).from_reader(text.as_bytes());
    let headers: BTreeMap<String, usize> = reader
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_ascii_lowercase(), i))
        .collect();
    let country_col = ["iso3", "country"]
        .iter()
        .find_map(|n| headers.get(*n).copied())
        .ok_or_else(|| Error::invalid("predictor table needs an `iso3` or `country` column"))?;

    let mut countries = Vec::new();
    let mut columns: BTreeMap<Predictor, Vec<Option<f64>>> = BTreeMap::new();
    let mut income = Vec::new();
    let mut present: BTreeSet<Predictor> = BTreeSet::new();

    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row = Row { headers: &headers, record: &record, line };
        let country =
            CountryCode::parse(&record[country_col]).map_err(|e| Error::Row { line, message: e.to_string() })?;
        countries.push(country);
        income.push(match headers.get("income_group") {
            Some(&i) if !is_missing(&record[i]) => {
                Some(record[i].parse().map_err(|e: Error| Error::Row { line, message: e.to_string() })?)
            }
            _ => None,
        });

        let population = row.get("population")?;
        if let Some(p) = population {
            if p <= 0.0 {
                return Err(Error::Row { line, message: format!("population must be positive, got {p}") });
            }
        }
        let ln_pop = match row.get("log_population")? {
            Some(v) => Some(v),
            None => population.map(f64::ln),
        };
        let raw = |name: &str| row.get(name);
        let log_of = |name: &str| -> Result<Option<f64>> {
            match raw(name)? {
                Some(v) => Ok(Some(row.ln(name, v)?)),
                None => Ok(None),
            }
        };
        let per_capita_log = |name: &str| -> Result<Option<f64>> {
            Ok(match (log_of(name)?, ln_pop) {
                (Some(l), Some(lp)) => Some(l - lp),
                _ => None,
            })
        };
        let per_capita = |name: &str| -> Result<Option<f64>> {
            Ok(match (raw(name)?, population.or(ln_pop.map(f64::exp))) {
                (Some(v), Some(p)) => Some(v / p),
                _ => None,
            })
        };

        let mut values: BTreeMap<Predictor, Option<f64>> = BTreeMap::new();
        use Predictor::*;
        for p in Predictor::ALL {
            let direct = row.get(p.name())?;
            let has_direct = headers.contains_key(p.name());
            let computed = if has_direct {
                direct
            } else {
                match p {
                    LogGdp => log_of("gdp")?,
                    LogPopulation => ln_pop,
                    LogPublications => log_of("publications")?,
                    LogHealthExp => log_of("health_exp")?,
                    LogPublicationsPerCapita => per_capita_log("publications")?,
                    HospitalsPerCapita => per_capita("hospitals")?,
                    HospitalBedsPerCapita => per_capita("hospital_beds")?,
                    LogHealthExpPerCapita => per_capita_log("health_exp")?,
                    LogGdpPerCapita => per_capita_log("gdp")?,
                    _ => None,
                }
            };
            let derivable = has_direct
                || match p {
                    LogGdp => headers.contains_key("gdp"),
                    LogPopulation => headers.contains_key("population"),
                    LogPublications => headers.contains_key("publications"),
                    LogHealthExp => headers.contains_key("health_exp"),
                    LogPublicationsPerCapita => headers.contains_key("publications"),
                    HospitalsPerCapita => headers.contains_key("hospitals"),
                    HospitalBedsPerCapita => headers.contains_key("hospital_beds"),
                    LogHealthExpPerCapita => headers.contains_key("health_exp"),
                    LogGdpPerCapita => headers.contains_key("gdp"),
                    _ => false,
                };
            if derivable {
                present.insert(p);
                values.insert(p, computed);
            }
        }
        for (p, v) in values {
            columns.entry(p).or_default().push(v);
        }
    }
    if countries.is_empty() {
        return Err(Error::EmptyInput);
    }
    columns.retain(|p, _| present.contains(p));
    PredictorTable::new(countries, columns, income)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_capita_log_ratio() {
        let e10 = 10f64.exp();
        let e5 = 5f64.exp();
        let text = format!("iso3,gdp,population\nUSA,{e10},{e5}\n");
        let t = ingest_predictors(text.as_bytes(), None).unwrap();
        let usa = CountryCode::parse("USA").unwrap();
        let v = t.value(usa, Predictor::LogGdpPerCapita).unwrap();
        assert!((v - 5.0).abs() < 1e-12, "{v}");
        assert!((t.value(usa, Predictor::LogGdp).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn per_capita_ratios_match_absolutes() {
        let text = "iso3,population,hospitals,hospital_beds,publications\nFRA,1000,20,500,300\n";
        let t = ingest_predictors(text.as_bytes(), None).unwrap();
        let fra = CountryCode::parse("FRA").unwrap();
        assert_eq!(t.value(fra, Predictor::HospitalsPerCapita), Some(0.02));
        assert_eq!(t.value(fra, Predictor::HospitalBedsPerCapita), Some(0.5));
        let lp = t.value(fra, Predictor::LogPublicationsPerCapita).unwrap();
        assert!((lp - 0.3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_population_is_an_error() {
        let text = "iso3,gdp,population\nUSA,100,0\n";
        assert!(matches!(ingest_predictors(text.as_bytes(), None), Err(Error::Row { line: 2, .. })));
    }

    #[test]
    fn sixty_percent_missing_is_flagged() {
        let text = "iso3,hdi,democracy_index\nUSA,0.9,NA\nFRA,0.9,\nDEU,0.9,NA\nGBR,0.9,8\nJPN,0.9,8\n";
        let t = ingest_predictors(text.as_bytes(), None).unwrap();
        assert_eq!(t.missing_fraction(Predictor::DemocracyIndex), Some(0.6));
        assert_eq!(t.excluded_predictors(), vec![Predictor::DemocracyIndex]);
        assert_eq!(t.missing_mask(Predictor::DemocracyIndex).unwrap(), vec![true, true, true, false, false]);
    }

    #[test]
    fn income_groups_parse() {
        let text = "iso3,hdi,income_group\nUSA,0.9,High income\nIND,0.6,Lower middle\nBRA,0.7,UpperMiddle\nNER,0.4,low\n";
        let t = ingest_predictors(text.as_bytes(), None).unwrap();
        assert_eq!(
            t.income_groups().to_vec(),
            vec![Some(IncomeGroup::High), Some(IncomeGroup::LowerMiddle), Some(IncomeGroup::UpperMiddle), Some(IncomeGroup::Low)]
        );
    }

    #[test]
    fn blocks_must_be_disjoint() {
        assert!(BlockSpec::validate(&BlockSpec::structural()).is_ok());
        assert!(BlockSpec::validate(&BlockSpec::policy()).is_ok());
        let bad = vec![BlockSpec::new("a", [Predictor::Hdi]), BlockSpec::new("b", [Predictor::Hdi])];
        assert!(BlockSpec::validate(&bad).is_err());
    }

    #[test]
    fn predictor_names_round_trip() {
        for p in Predictor::ALL {
            assert_eq!(p.name().parse::<Predictor>().unwrap(), p);
        }
    }
}
