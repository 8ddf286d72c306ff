use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::{CountryCode, Predictor, PredictorTable, MAX_MISSING_FRACTION};
use crate::stats::median;

/// Why a requested predictor did not enter a design.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    Absent,
    TooManyMissing,
    ZeroVariance,
}

#[derive(Clone, Debug)]
pub struct Imputation {
    pub table: PredictorTable,
    pub excluded: Vec<Predictor>,
    /// Number of filled entries per retained predictor.
    pub imputed: BTreeMap<Predictor, usize>,
}

/// Fills missing entries with the per-predictor median of observed values.
///
/// Predictors missing for more than half the countries are removed and
/// listed in `excluded` (an all-missing column always falls in this case).
pub fn impute_median(table: &PredictorTable) -> Result<Imputation> {
    if table.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = table.clone();
    let mut excluded = Vec::new();
    let mut imputed = BTreeMap::new();
    for p in table.predictors().collect::<Vec<_>>() {
        let col = table.column(p).expect("listed predictor");
        let observed: Vec<f64> = col.iter().flatten().copied().collect();
        let missing = col.len() - observed.len();
        if missing as f64 / col.len() as f64 > MAX_MISSING_FRACTION || observed.is_empty() {
            excluded.push(p);
            out = out.without_column(p);
            continue;
        }
        if missing > 0 {
            let m = median(&observed)?;
            out = out.with_column(p, col.iter().map(|v| Some(v.unwrap_or(m))).collect())?;
        }
        imputed.insert(p, missing);
    }
    Ok(Imputation { table: out, excluded, imputed })
}

/// Column scaled to mean 0 and population SD 1, or `None` for zero variance.
pub fn standardize_column(values: &[f64]) -> Option<Vec<f64>> {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    if !(sd > 1e-12 * m.abs().max(1.0)) {
        return None;
    }
    Some(values.iter().map(|v| (v - m) / sd).collect())
}

#[derive(Clone, Debug)]
pub struct Standardization {
    pub table: PredictorTable,
    pub excluded: Vec<Predictor>,
}

/// Standardizes every column (population SD); zero-variance columns are removed and listed.
pub fn standardize(table: &PredictorTable) -> Result<Standardization> {
    let mut out = table.clone();
    let mut excluded = Vec::new();
    for p in table.predictors().collect::<Vec<_>>() {
        let col = table.dense_column(p)?;
        match standardize_column(&col) {
            Some(z) => out = out.with_column(p, z.into_iter().map(Some).collect())?,
            None => {
                excluded.push(p);
                out = out.without_column(p);
            }
        }
    }
    Ok(Standardization { table: out, excluded })
}

/// Response and standardized predictor columns aligned by country.
#[derive(Clone, Debug, Serialize)]
pub struct Design {
    pub countries: Vec<CountryCode>,
    pub y: Vec<f64>,
    pub predictors: Vec<Predictor>,
    pub columns: Vec<Vec<f64>>,
    pub excluded: Vec<(Predictor, Exclusion)>,
}

impl Design {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn named_columns(&self, which: &[Predictor]) -> Vec<(String, Vec<f64>)> {
        which
            .iter()
            .filter_map(|p| self.index_of(*p).map(|i| (p.name().to_string(), self.columns[i].clone())))
            .collect()
    }

    pub fn index_of(&self, p: Predictor) -> Option<usize> {
        self.predictors.iter().position(|q| *q == p)
    }

    /// Rows in the given order (a bootstrap resample may repeat rows).
    pub fn take_rows(&self, rows: &[usize]) -> Design {
        Design {
            countries: rows.iter().map(|&i| self.countries[i]).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            predictors: self.predictors.clone(),
            columns: self.columns.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect(),
            excluded: self.excluded.clone(),
        }
    }
}

/// Aligns a per-country response with predictors: selects the countries that
/// have a response (in table order), imputes medians, then standardizes.
pub fn build_design(response: &BTreeMap<CountryCode, f64>, table: &PredictorTable, wanted: &[Predictor]) -> Result<Design> {
    let keep = response.keys().copied().collect();
    let mut sub = table.select_countries(&keep);
    if sub.is_empty() {
        return Err(Error::invalid("no country has both a response and predictor data"));
    }
    let mut excluded = Vec::new();
    let present: Vec<Predictor> = sub.predictors().collect();
    for p in present {
        if !wanted.contains(&p) {
            sub = sub.without_column(p);
        }
    }
    for p in wanted {
        if sub.column(*p).is_none() {
            excluded.push((*p, Exclusion::Absent));
        }
    }
    let imp = impute_median(&sub)?;
    excluded.extend(imp.excluded.iter().map(|p| (*p, Exclusion::TooManyMissing)));
    let st = standardize(&imp.table)?;
    excluded.extend(st.excluded.iter().map(|p| (*p, Exclusion::ZeroVariance)));
    let predictors: Vec<Predictor> = wanted.iter().copied().filter(|p| st.table.column(*p).is_some()).collect();
    let columns = predictors.iter().map(|p| st.table.dense_column(*p)).collect::<Result<Vec<_>>>()?;
    let countries = st.table.countries().to_vec();
    let y = countries.iter().map(|c| response[c]).collect();
    Ok(Design { countries, y, predictors, columns, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::cc;

    fn table(cols: &[(Predictor, Vec<Option<f64>>)]) -> PredictorTable {
        let n = cols[0].1.len();
        let countries = (0..n).map(|i| cc(&format!("C{}{}", (b'A' + (i / 26) as u8) as char, (b'A' + (i % 26) as u8) as char))).collect();
        PredictorTable::new(countries, cols.iter().cloned().collect(), vec![None; n]).unwrap()
    }

    #[test]
    fn median_fill_and_exclusion() {
        let t = table(&[
            (Predictor::Hdi, vec![Some(1.0), None, Some(3.0)]),
            (Predictor::DemocracyIndex, vec![None, None, Some(3.0)]),
            (Predictor::LogGdp, vec![Some(1.0), Some(2.0), Some(3.0)]),
        ]);
        let imp = impute_median(&t).unwrap();
        assert_eq!(imp.table.dense_column(Predictor::Hdi).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(imp.excluded, vec![Predictor::DemocracyIndex]);
        assert_eq!(imp.table.column(Predictor::LogGdp), t.column(Predictor::LogGdp));
        assert_eq!(imp.imputed[&Predictor::LogGdp], 0);
    }

    #[test]
    fn standardize_small_cases() {
        assert_eq!(standardize_column(&[0.0, 2.0]).unwrap(), vec![-1.0, 1.0]);
        assert!(standardize_column(&[4.0, 4.0, 4.0]).is_none());
        let z = standardize_column(&[1.0, 5.0, 2.0, 8.0]).unwrap();
        let again = standardize_column(&z).unwrap();
        for (a, b) in z.iter().zip(again) {
            assert!((a - b).abs() < 1e-12);
        }
        let t = table(&[(Predictor::Hdi, vec![Some(1.0), Some(1.0)]), (Predictor::LogGdp, vec![Some(0.0), Some(2.0)])]);
        let s = standardize(&t).unwrap();
        assert_eq!(s.excluded, vec![Predictor::Hdi]);
    }

    #[test]
    fn design_alignment() {
        let t = table(&[
            (Predictor::Hdi, vec![Some(1.0), Some(2.0), Some(4.0)]),
            (Predictor::LogGdp, vec![Some(1.0), Some(1.0), Some(1.0)]),
        ]);
        let mut resp = BTreeMap::new();
        resp.insert(t.countries()[0], 10.0);
        resp.insert(t.countries()[2], 30.0);
        let d = build_design(&resp, &t, &[Predictor::Hdi, Predictor::LogGdp, Predictor::Hospitals]).unwrap();
        assert_eq!(d.y, vec![10.0, 30.0]);
        assert_eq!(d.predictors, vec![Predictor::Hdi]);
        assert_eq!(d.columns[0], vec![-1.0, 1.0]);
        assert!(d.excluded.contains(&(Predictor::Hospitals, Exclusion::Absent)));
        assert!(d.excluded.contains(&(Predictor::LogGdp, Exclusion::ZeroVariance)));
    }
}
