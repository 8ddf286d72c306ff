use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// r × k table of nonnegative counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    counts: Vec<Vec<f64>>,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
}

impl ContingencyTable {
    pub fn new(counts: Vec<Vec<f64>>, row_labels: Vec<String>, col_labels: Vec<String>) -> Result<Self> {
        let r = counts.len();
        let k = counts.first().map_or(0, Vec::len);
        if r < 2 || k < 2 {
            return Err(Error::invalid("contingency table needs at least 2 rows and 2 columns"));
        }
        if counts.iter().any(|row| row.len() != k) {
            return Err(Error::invalid("ragged contingency table"));
        }
        if counts.iter().flatten().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid("counts must be finite and nonnegative"));
        }
        if row_labels.len() != r || col_labels.len() != k {
            return Err(Error::invalid("label count does not match table shape"));
        }
        if counts.iter().flatten().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("contingency table grand total must be positive"));
        }
        Ok(ContingencyTable { counts, row_labels, col_labels })
    }

    /// Unlabelled table; rows and columns are numbered.
    pub fn from_counts(counts: Vec<Vec<f64>>) -> Result<Self> {
        let r = counts.len();
        let k = counts.first().map_or(0, Vec::len);
        Self::new(counts, (0..r).map(|i| i.to_string()).collect(), (0..k).map(|i| i.to_string()).collect())
    }

    /// Cross-tabulates (row, column) label pairs; labels are sorted.
    pub fn from_observations<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cells: BTreeMap<(&str, &str), f64> = BTreeMap::new();
        let mut rows = std::collections::BTreeSet::new();
        let mut cols = std::collections::BTreeSet::new();
        for (r, c) in pairs {
            *cells.entry((r, c)).or_default() += 1.0;
            rows.insert(r);
            cols.insert(c);
        }
        let counts = rows
            .iter()
            .map(|r| cols.iter().map(|c| cells.get(&(*r, *c)).copied().unwrap_or(0.0)).collect())
            .collect();
        Self::new(counts, rows.iter().map(|s| s.to_string()).collect(), cols.iter().map(|s| s.to_string()).collect())
    }

    pub fn rows(&self) -> usize {
        self.counts.len()
    }

    pub fn cols(&self) -> usize {
        self.counts[0].len()
    }

    pub fn counts(&self) -> &[Vec<f64>] {
        &self.counts
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    /// Merges columns whose total is below `min_count` into one `other` column.
    ///
    /// Returns the table unchanged when fewer than two columns would be pooled.
    pub fn pool_columns_below(&self, min_count: f64) -> Result<Self> {
        let sums = self.col_sums();
        let small: Vec<usize> = (0..self.cols()).filter(|&j| sums[j] < min_count).collect();
        if small.len() < 2 {
            return Ok(self.clone());
        }
        let keep: Vec<usize> = (0..self.cols()).filter(|j| !small.contains(j)).collect();
        let counts = self
            .counts
            .iter()
            .map(|row| {
                let mut out: Vec<f64> = keep.iter().map(|&j| row[j]).collect();
                out.push(small.iter().map(|&j| row[j]).sum());
                out
            })
            .collect();
        let mut labels: Vec<String> = keep.iter().map(|&j| self.col_labels[j].clone()).collect();
        labels.push("other".into());
        Self::new(counts, self.row_labels.clone(), labels)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of independence.
pub fn chi_square(table: &ContingencyTable) -> Result<ChiSquare> {
    let rs = table.row_sums();
    let cs = table.col_sums();
    if rs.iter().chain(&cs).any(|m| *m <= 0.0) {
        return Err(Error::undefined("zero margin in contingency table"));
    }
    let n = table.total();
    let mut chi2 = 0.0;
    for (i, row) in table.counts().iter().enumerate() {
        for (j, obs) in row.iter().enumerate() {
            let e = rs[i] * cs[j] / n;
            chi2 += (obs - e).powi(2) / e;
        }
    }
    let df = (table.rows() - 1) * (table.cols() - 1);
    let p = 1.0 - ChiSquared::new(df as f64).expect("df > 0").cdf(chi2);
    Ok(ChiSquare { chi2, df, p_value: p.clamp(0.0, 1.0) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectBand {
    VerySmall,
    Small,
    Medium,
    Large,
}

impl EffectBand {
    pub fn of(v: f64) -> Self {
        if v < 0.1 {
            EffectBand::VerySmall
        } else if v < 0.3 {
            EffectBand::Small
        } else if v <= 0.5 {
            EffectBand::Medium
        } else {
            EffectBand::Large
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CramersV {
    pub v: f64,
    pub v_uncorrected: f64,
    pub chi2: f64,
    pub n: f64,
    pub band: EffectBand,
}

/// Bias-corrected Cramér's V (Bergsma's correction).
///
/// φ² = χ²/n, φ²_corr = max(0, φ² − (k−1)(r−1)/(n−1)), k_corr = k − (k−1)²/(n−1),
/// r_corr likewise, V = sqrt(φ²_corr / min(k_corr − 1, r_corr − 1)).
pub fn cramers_v_corrected(table: &ContingencyTable) -> Result<CramersV> {
    let chi = chi_square(table)?;
    let n = table.total();
    if n <= 1.0 {
        return Err(Error::undefined("Cramér's V needs more than one observation"));
    }
    let (r, k) = (table.rows() as f64, table.cols() as f64);
    let phi2 = chi.chi2 / n;
    let phi2_corr = (phi2 - (k - 1.0) * (r - 1.0) / (n - 1.0)).max(0.0);
    let k_corr = k - (k - 1.0).powi(2) / (n - 1.0);
    let r_corr = r - (r - 1.0).powi(2) / (n - 1.0);
    let denom = (k_corr - 1.0).min(r_corr - 1.0);
    if denom <= 0.0 {
        return Err(Error::undefined("corrected table dimension collapses (min(k_corr, r_corr) <= 1)"));
    }
    let v = (phi2_corr / denom).sqrt();
    let v_uncorrected = (phi2 / (k - 1.0).min(r - 1.0)).sqrt();
    Ok(CramersV { v, v_uncorrected, chi2: chi.chi2, n, band: EffectBand::of(v) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independence_gives_zero() {
        let t = ContingencyTable::from_counts(vec![vec![10.0, 20.0], vec![30.0, 60.0]]).unwrap();
        let c = chi_square(&t).unwrap();
        assert!(c.chi2.abs() < 1e-12);
        assert_eq!(c.df, 1);
        assert_eq!(cramers_v_corrected(&t).unwrap().v, 0.0);
    }

    #[test]
    fn diagonal_two_by_two() {
        // expected 5 everywhere: 4 * 25/5 = 20
        let t = ContingencyTable::from_counts(vec![vec![10.0, 0.0], vec![0.0, 10.0]]).unwrap();
        assert!((chi_square(&t).unwrap().chi2 - 20.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_association_large_n() {
        let t = ContingencyTable::from_counts(vec![vec![5000.0, 0.0], vec![0.0, 5000.0]]).unwrap();
        let v = cramers_v_corrected(&t).unwrap();
        assert!(v.v > 0.99, "{}", v.v);
        assert_eq!(v.band, EffectBand::Large);
    }

    #[test]
    fn zero_margin_is_an_error() {
        let t = ContingencyTable::from_counts(vec![vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        assert!(chi_square(&t).is_err());
        assert!(ContingencyTable::from_counts(vec![vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn observations_cross_tabulate() {
        let t = ContingencyTable::from_observations([("a", "x"), ("a", "y"), ("b", "x"), ("b", "x")]).unwrap();
        assert_eq!(t.counts(), &[vec![1.0, 1.0], vec![2.0, 0.0]]);
        assert_eq!(t.row_labels(), &["a", "b"]);
    }

    #[test]
    fn pooling_merges_rare_columns() {
        let t = ContingencyTable::from_counts(vec![vec![50.0, 1.0, 2.0, 40.0], vec![60.0, 0.0, 1.0, 30.0]]).unwrap();
        let p = t.pool_columns_below(5.0).unwrap();
        assert_eq!(p.cols(), 3);
        assert_eq!(p.counts()[0], vec![50.0, 40.0, 3.0]);
        assert_eq!(p.col_labels().last().unwrap(), "other");
    }

    #[test]
    fn bands() {
        assert_eq!(EffectBand::of(0.0207), EffectBand::VerySmall);
        assert_eq!(EffectBand::of(0.2), EffectBand::Small);
        assert_eq!(EffectBand::of(0.4), EffectBand::Medium);
        assert_eq!(EffectBand::of(0.7), EffectBand::Large);
    }
}
