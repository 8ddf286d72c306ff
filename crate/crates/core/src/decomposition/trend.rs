use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::theil_decompose;
use crate::error::{Error, Result};
use crate::metrics::{gini, pbr_table, UnitKind};
use crate::panel::{bin_start, AggregateSpec, Panel, PanelCell, Period};
use crate::stats::{linear_fit, percentile, BootstrapSpec};

/// Per-bin metric whose trend is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendMetric {
    Gini,
    TheilTotal,
    BetweenDiseaseShare,
    WithinDiseaseShare,
    BetweenCountryShare,
    WithinCountryShare,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub p_value: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// (bin start year, metric) points the line was fitted to.
    pub series: Vec<(u16, f64)>,
}

/// OLS trend of a metric series over time, without a bootstrap interval.
pub fn fit_trend(series: &[(u16, f64)]) -> Result<TrendEstimate> {
    if series.len() < 3 {
        return Err(Error::invalid("trend needs at least three time points"));
    }
    let x: Vec<f64> = series.iter().map(|p| f64::from(p.0)).collect();
    let y: Vec<f64> = series.iter().map(|p| p.1).collect();
    let f = linear_fit(&x, &y)?;
    Ok(TrendEstimate {
        slope: f.slope,
        intercept: f.intercept,
        r2: f.r_squared,
        p_value: f.p_value,
        ci_low: None,
        ci_high: None,
        series: series.to_vec(),
    })
}

fn metric_of(cells: &[PanelCell], metric: TrendMetric) -> Option<f64> {
    let panel = Panel::from_cells(cells.iter().copied()).ok()?;
    let pairs = panel.aggregate(AggregateSpec::pairs()).ok()?;
    let table = pbr_table(&pairs);
    let theil = |kind| theil_decompose(&table.records, kind).ok();
    match metric {
        TrendMetric::Gini => gini(&table.values()).ok(),
        TrendMetric::TheilTotal => theil(UnitKind::Disease).map(|t| t.total),
        TrendMetric::BetweenDiseaseShare => theil(UnitKind::Disease).map(|t| t.between_share()),
        TrendMetric::WithinDiseaseShare => theil(UnitKind::Disease).map(|t| t.within_share()),
        TrendMetric::BetweenCountryShare => theil(UnitKind::Country).map(|t| t.between_share()),
        TrendMetric::WithinCountryShare => theil(UnitKind::Country).map(|t| t.within_share()),
    }
}

fn series_of(cells: &[PanelCell], metric: TrendMetric, width: u16) -> Option<Vec<(u16, f64)>> {
    let mut bins: std::collections::BTreeMap<u16, Vec<PanelCell>> = Default::default();
    for c in cells {
        bins.entry(bin_start(c.year, width)).or_default().push(*c);
    }
    bins.into_iter().map(|(s, cs)| metric_of(&cs, metric).map(|v| (s, v))).collect()
}

/// Trend of `metric` computed in `width`-year bins, with an optional bootstrap
/// interval for the slope from resampling country-disease-year records.
///
/// Each bootstrap replicate re-derives the metric in every bin from the
/// resampled records. The interval is widened to contain the point slope.
pub fn temporal_trend(
    panel: &Panel,
    period: Period,
    metric: TrendMetric,
    width: u16,
    bootstrap: Option<&BootstrapSpec>,
) -> Result<TrendEstimate> {
    if width == 0 {
        return Err(Error::invalid("bin width must be >= 1"));
    }
    let cells: Vec<PanelCell> = panel.restrict(period)?.full_cells().collect();
    if cells.is_empty() {
        return Err(Error::invalid("trend needs country-disease-year records"));
    }
    let series =
        series_of(&cells, metric, width).ok_or_else(|| Error::undefined("metric undefined in at least one bin"))?;
    let mut est = fit_trend(&series)?;
    if let Some(spec) = bootstrap {
        spec.validate()?;
        let n = cells.len();
        let slopes: Vec<Option<f64>> = (0..spec.n_iterations as u64)
            .into_par_iter()
            .map(|b| {
                let idx = crate::stats::resample_indices(spec.seed, "trend", b, n);
                let sample: Vec<PanelCell> = idx.iter().map(|&i| cells[i]).collect();
                let s = series_of(&sample, metric, width)?;
                if s.len() < 3 {
                    return None;
                }
                fit_trend(&s).ok().map(|t| t.slope)
            })
            .collect();
        let mut ok: Vec<f64> = slopes.into_iter().flatten().collect();
        let skipped = spec.n_iterations - ok.len();
        if skipped as f64 > 0.1 * spec.n_iterations as f64 {
            return Err(Error::Numerical(format!("trend undefined on {skipped} of {} resamples", spec.n_iterations)));
        }
        ok.sort_by(f64::total_cmp);
        est.ci_low = Some(percentile(&ok, spec.low_percentile).min(est.slope));
        est.ci_high = Some(percentile(&ok, spec.high_percentile).max(est.slope));
    }
    Ok(est)
}
