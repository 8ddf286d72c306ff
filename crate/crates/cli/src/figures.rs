//! Plot-ready tables derived from a run's result files.

use std::path::Path;

use serde_json::Value;
use trialeq_core::counterfactual::Scenario;

use crate::error::{CliError, CliResult};
use crate::output::{num, read_csv, Output};

/// Diverging-scale bound for the choropleth.
pub const CHOROPLETH_LIMIT: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Lorenz,
    Waterfall,
    Choropleth,
    CisBars,
    TheilTimeline,
    NetworkMetrics,
}

impl Figure {
    pub const ALL: [Figure; 6] = [
        Figure::Lorenz,
        Figure::Waterfall,
        Figure::Choropleth,
        Figure::CisBars,
        Figure::TheilTimeline,
        Figure::NetworkMetrics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Lorenz => "lorenz",
            Figure::Waterfall => "waterfall",
            Figure::Choropleth => "choropleth",
            Figure::CisBars => "cis_bars",
            Figure::TheilTimeline => "theil_timeline",
            Figure::NetworkMetrics => "network_metrics",
        }
    }

    fn stage(self) -> &'static str {
        match self {
            Figure::Lorenz | Figure::Choropleth | Figure::CisBars => "metrics",
            Figure::Waterfall => "simulation",
            Figure::TheilTimeline => "decomposition",
            Figure::NetworkMetrics => "network",
        }
    }

    /// Result files the figure is built from.
    fn sources(self, scenario: Scenario) -> Vec<String> {
        match self {
            Figure::Lorenz => vec!["lorenz.csv".into()],
            Figure::Waterfall => vec![format!("waterfall_{}.csv", scenario.name())],
            Figure::Choropleth => vec!["pbr_national.csv".into()],
            Figure::CisBars => vec!["cis.csv".into()],
            Figure::TheilTimeline => vec!["theil_timeline.csv".into()],
            Figure::NetworkMetrics => vec!["network_metrics.json".into()],
        }
    }
}

/// Clamped choropleth value and whether clamping happened.
pub fn choropleth_value(log_pbr: f64) -> (f64, bool) {
    let v = log_pbr.clamp(-CHOROPLETH_LIMIT, CHOROPLETH_LIMIT);
    (v, v != log_pbr)
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> CliResult<Self> {
        let (header, rows) = read_csv(path)?;
        Ok(Table { header, rows })
    }

    fn col(&self, name: &str) -> CliResult<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| CliError::data(format!("result table lacks column `{name}`")))
    }

    fn f64_at(row: &[String], i: usize) -> CliResult<Option<f64>> {
        let s = row[i].trim();
        if s.is_empty() {
            return Ok(None);
        }
        s.parse().map(Some).map_err(|_| CliError::data(format!("non-numeric result field `{s}`")))
    }
}

/// Writes `figure_<name>.csv` (waterfall: `figure_waterfall_<scenario>.csv`) from results in `from`.
pub fn emit_figure(from: &Path, out: &mut Output, figure: Figure, scenario: Scenario) -> CliResult<String> {
    for src in figure.sources(scenario) {
        if !from.join(&src).is_file() {
            return Err(CliError::config(format!(
                "figure `{}` needs stage `{}` to have run: {} not found",
                figure.name(),
                figure.stage(),
                from.join(&src).display()
            )));
        }
    }
    match figure {
        Figure::Lorenz => {
            let t = Table::read(&from.join("lorenz.csv"))?;
            let (x, y) = (t.col("burden_share")?, t.col("participant_share")?);
            let rows = t.rows.iter().map(|r| vec![r[x].clone(), r[y].clone()]);
            out.csv("figure_lorenz.csv", &["cumulative_burden_share", "cumulative_participant_share"], rows)?;
            Ok("figure_lorenz.csv".into())
        }
        Figure::Waterfall => {
            let src = format!("waterfall_{}.csv", scenario.name());
            let t = Table::read(&from.join(&src))?;
            let cols = ["step", "countries", "gini", "pct_reduction", "ci_low", "ci_high"].map(|c| t.col(c));
            let [step, countries, gini, pct, lo, hi] = cols;
            let (step, countries, gini, pct, lo, hi) = (step?, countries?, gini?, pct?, lo?, hi?);
            let mut prev: Option<f64> = None;
            let mut rows = Vec::new();
            for r in &t.rows {
                let g = Table::f64_at(r, gini)?.ok_or_else(|| CliError::data(format!("{src}: missing gini")))?;
                let drop = prev.map_or(0.0, |p| p - g);
                prev = Some(g);
                rows.push(vec![
                    r[step].clone(),
                    r[countries].clone(),
                    r[gini].clone(),
                    num(drop),
                    r[pct].clone(),
                    r[lo].clone(),
                    r[hi].clone(),
                ]);
            }
            let name = format!("figure_waterfall_{}.csv", scenario.name());
            out.csv(&name, &["step", "countries", "gini", "gini_drop", "pct_reduction", "ci_low", "ci_high"], rows)?;
            Ok(name)
        }
        Figure::Choropleth => {
            let t = Table::read(&from.join("pbr_national.csv"))?;
            let (c, l) = (t.col("country")?, t.col("log_pbr")?);
            let mut rows = Vec::new();
            for r in &t.rows {
                rows.push(match Table::f64_at(r, l)? {
                    Some(v) => {
                        let (shown, clamped) = choropleth_value(v);
                        vec![r[c].clone(), num(shown), clamped.to_string(), r[l].clone()]
                    }
                    // no participants: no value on the map
                    None => vec![r[c].clone(), String::new(), "false".into(), String::new()],
                });
            }
            out.csv("figure_choropleth.csv", &["iso3", "value", "clamped", "log_pbr"], rows)?;
            Ok("figure_choropleth.csv".into())
        }
        Figure::CisBars => {
            let t = Table::read(&from.join("cis.csv"))?;
            let (k, u, v, lo, hi) = (t.col("kind")?, t.col("unit")?, t.col("cis_percent")?, t.col("ci_low")?, t.col("ci_high")?);
            let mut parsed = Vec::new();
            for r in &t.rows {
                let val = Table::f64_at(r, v)?.ok_or_else(|| CliError::data("cis.csv: missing cis_percent"))?;
                parsed.push((r, val));
            }
            let mut rows = Vec::new();
            for kind in ["disease", "country"] {
                let mut group: Vec<_> = parsed.iter().filter(|(r, _)| r[k] == kind).collect();
                group.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0[u].cmp(&b.0[u])));
                for (rank, (r, _)) in group.into_iter().enumerate() {
                    rows.push(vec![kind.to_string(), (rank + 1).to_string(), r[u].clone(), r[v].clone(), r[lo].clone(), r[hi].clone()]);
                }
            }
            out.csv("figure_cis_bars.csv", &["kind", "rank", "unit", "cis_percent", "ci_low", "ci_high"], rows)?;
            Ok("figure_cis_bars.csv".into())
        }
        Figure::TheilTimeline => {
            let t = Table::read(&from.join("theil_timeline.csv"))?;
            let (g, s, e, tot, b, w) = (
                t.col("grouping")?,
                t.col("bin_start")?,
                t.col("bin_end")?,
                t.col("total")?,
                t.col("between_share")?,
                t.col("within_share")?,
            );
            let mut rows = Vec::new();
            for r in &t.rows {
                let pct = |i: usize| -> CliResult<String> { Ok(Table::f64_at(r, i)?.map(|x| num(100.0 * x)).unwrap_or_default()) };
                rows.push(vec![r[g].clone(), format!("{}-{}", r[s], r[e]), r[tot].clone(), pct(b)?, pct(w)?]);
            }
            out.csv("figure_theil_timeline.csv", &["grouping", "period", "theil", "between_pct", "within_pct"], rows)?;
            Ok("figure_theil_timeline.csv".into())
        }
        Figure::NetworkMetrics => {
            let path = from.join("network_metrics.json");
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            let m = &v["result"];
            let metric_names = ["density", "factor_homophily", "modularity", "avg_path_length"];
            let mut rows = Vec::new();
            for name in metric_names {
                let x = m[name].as_f64().ok_or_else(|| CliError::data(format!("network_metrics.json lacks `{name}`")))?;
                rows.push(vec!["baseline".into(), "0".into(), "0".into(), name.to_string(), num(x), num(x), num(x)]);
            }
            let evo = from.join("network_evolution.csv");
            if evo.is_file() {
                let t = Table::read(&evo)?;
                let (sc, st, dg) = (t.col("scenario")?, t.col("step")?, t.col("delta_g")?);
                for r in &t.rows {
                    for name in metric_names {
                        let (v, lo, hi) = (t.col(name)?, t.col(&format!("{name}_ci_low"))?, t.col(&format!("{name}_ci_high"))?);
                        rows.push(vec![
                            r[sc].clone(),
                            r[st].clone(),
                            r[dg].clone(),
                            name.to_string(),
                            r[v].clone(),
                            r[lo].clone(),
                            r[hi].clone(),
                        ]);
                    }
                }
            }
            out.csv("figure_network_metrics.csv", &["scenario", "step", "delta_g", "metric", "value", "ci_low", "ci_high"], rows)?;
            Ok("figure_network_metrics.csv".into())
        }
    }
}

/// Emits each figure whose source results exist in `from`; waterfalls for every scenario found.
pub fn emit_available(from: &Path, out: &mut Output, figures: &[Figure]) -> CliResult<()> {
    for &f in figures {
        let scenarios: &[Scenario] = if f == Figure::Waterfall { &[Scenario::Full, Scenario::Targeted] } else { &[Scenario::Full] };
        for &s in scenarios {
            if f.sources(s).iter().all(|src| from.join(src).is_file()) {
                emit_figure(from, out, f, s)?;
            }
        }
    }
    Ok(())
}
