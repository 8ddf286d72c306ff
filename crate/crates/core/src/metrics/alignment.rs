use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::{IncomeGroup, Panel, Period, PredictorTable};
use crate::stats::linear_fit;

/// Log-log fit of average annual participants on average annual DALYs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlignmentFit {
    pub group: IncomeGroup,
    pub beta: f64,
    pub intercept: f64,
    pub p_value: f64,
    pub r_squared: f64,
    pub n: usize,
    /// Pairs of the group dropped for having no participants.
    pub dropped_zero: usize,
}

/// OLS of ln(avg annual participants) on ln(avg annual DALYs) over the
/// country-disease pairs of countries in `group`.
pub fn alignment_regression(
    panel: &Panel,
    predictors: &PredictorTable,
    group: IncomeGroup,
    period: Period,
) -> Result<AlignmentFit> {
    let years = panel.years().into_iter().filter(|y| period.contains(*y)).count().max(1) as f64;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut dropped_zero = 0;
    for ((c, _), t) in panel.pair_totals(period) {
        if predictors.income_group(c) != Some(group) {
            continue;
        }
        if t.participants <= 0.0 {
            dropped_zero += 1;
            continue;
        }
        x.push((t.dalys / years).ln());
        y.push((t.participants / years).ln());
    }
    if x.len() < 3 {
        return Err(Error::invalid(format!("income group {group} has fewer than 3 usable pairs")));
    }
    let f = linear_fit(&x, &y)?;
    Ok(AlignmentFit {
        group,
        beta: f.slope,
        intercept: f.intercept,
        p_value: f.p_value,
        r_squared: f.r_squared,
        n: f.n,
        dropped_zero,
    })
}

/// Fits every income group that has enough pairs; groups that cannot be fitted are skipped.
pub fn alignment_by_income(panel: &Panel, predictors: &PredictorTable, period: Period) -> Vec<AlignmentFit> {
    IncomeGroup::ALL
        .iter()
        .filter_map(|g| alignment_regression(panel, predictors, *g, period).ok())
        .collect()
}
