//! National PBR aggregation and median-alignment scenarios.
//!
//! A scenario replaces the national PBR of the k countries furthest from the
//! median with the median itself and reports the resulting Gini reduction.
//! Uncertainty comes from resampling countries; replicate `b` uses the same
//! resample in every scenario, so scenarios can be compared pairwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::gini;
use crate::panel::{CountryCode, Panel, Period};
use crate::stats::{self, paired_t_test, percentile, resample_indices};

pub const RESAMPLE_STAGE: &str = "counterfactual-resample";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NationalPbr {
    pub country: CountryCode,
    pub participants_total: f64,
    pub dalys_total: f64,
    pub pbr: f64,
    pub participant_share: f64,
    pub daly_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NationalTable {
    /// Sorted by country code.
    pub rows: Vec<NationalPbr>,
    pub median: f64,
    pub gini: f64,
    /// Countries without burden; their PBR is undefined.
    pub excluded: Vec<CountryCode>,
}

impl NationalTable {
    pub fn pbrs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.pbr).collect()
    }
}

/// Sums each country over diseases and years and normalizes by global totals.
pub fn national_pbr(panel: &Panel, period: Period) -> Result<NationalTable> {
    let totals = panel.country_totals(period);
    let (mut rows, mut excluded) = (Vec::new(), Vec::new());
    for (c, t) in &totals {
        if t.dalys > 0.0 {
            rows.push((*c, *t));
        } else {
            excluded.push(*c);
        }
    }
    let p: f64 = rows.iter().map(|r| r.1.participants).sum();
    let b: f64 = rows.iter().map(|r| r.1.dalys).sum();
    if p <= 0.0 || b <= 0.0 {
        return Err(Error::undefined("zero global participants or DALYs"));
    }
    let positive = rows.iter().filter(|r| r.1.participants > 0.0).count();
    if positive < 2 {
        return Err(Error::invalid("national PBR needs two countries with participants and DALYs"));
    }
    let rows: Vec<NationalPbr> = rows
        .into_iter()
        .map(|(country, t)| {
            let (ps, bs) = (t.participants / p, t.dalys / b);
            NationalPbr {
                country,
                participants_total: t.participants,
                dalys_total: t.dalys,
                pbr: ps / bs,
                participant_share: ps,
                daly_share: bs,
            }
        })
        .collect();
    let pbrs: Vec<f64> = rows.iter().map(|r| r.pbr).collect();
    Ok(NationalTable { median: stats::median(&pbrs)?, gini: gini(&pbrs)?, rows, excluded })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Full,
    Targeted,
}

impl Scenario {
    pub fn default_steps(self) -> &'static [f64] {
        match self {
            Scenario::Full => &[0.25, 0.5, 0.75, 1.0],
            Scenario::Targeted => &[0.1, 0.2, 0.3, 0.4],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Full => "full",
            Scenario::Targeted => "targeted",
        }
    }
}

/// Order in which countries are adjusted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ranking {
    /// Largest |ln(pbr / median)| first.
    #[default]
    MedianDeviation,
    /// Largest participant total first.
    ParticipantVolume,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub bootstrap_iters: usize,
    pub seed: u64,
    pub ranking: Ranking,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { bootstrap_iters: 200, seed: 42, ranking: Ranking::MedianDeviation }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step {
    pub fraction: f64,
    pub countries_adjusted: usize,
    pub gini: f64,
    pub pct_reduction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Adjusted Gini per bootstrap replicate.
    #[serde(skip)]
    pub replicate_gini: Vec<f64>,
    #[serde(skip)]
    pub replicate_reduction: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    /// First step is the unadjusted baseline.
    pub steps: Vec<Step>,
    /// Percent reduction per percent of countries adjusted, at the final step.
    pub efficiency: f64,
    /// Paired t-test of baseline against final-step Gini across replicates.
    pub p_value: f64,
    pub n_countries: usize,
    pub median: f64,
    #[serde(skip)]
    pub replicate_baseline: Vec<f64>,
    pub skipped_replicates: usize,
}

impl ScenarioResult {
    pub fn baseline_gini(&self) -> f64 {
        self.steps[0].gini
    }

    pub fn last(&self) -> &Step {
        self.steps.last().expect("baseline step always present")
    }
}

/// Indices in adjustment order; ties fall back to input order.
fn adjustment_order(pbrs: &[f64], participants: &[f64], median: f64, ranking: Ranking) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pbrs.len()).collect();
    match ranking {
        Ranking::MedianDeviation => {
            let dev: Vec<f64> = pbrs.iter().map(|p| (p / median).ln().abs()).collect();
            idx.sort_by(|&a, &b| dev[b].total_cmp(&dev[a]));
        }
        Ranking::ParticipantVolume => idx.sort_by(|&a, &b| participants[b].total_cmp(&participants[a])),
    }
    idx
}

fn reduction(base: f64, adjusted: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        100.0 * ((base - adjusted) / base)
    }
}

/// Baseline Gini followed by the adjusted Gini at each k.
fn run(pbrs: &[f64], participants: &[f64], ks: &[usize], ranking: Ranking) -> Result<Vec<f64>> {
    let median = stats::median(pbrs)?;
    let order = adjustment_order(pbrs, participants, median, ranking);
    let mut v = pbrs.to_vec();
    let mut out = vec![gini(&v)?];
    let mut done = 0;
    for &k in ks {
        for &i in &order[done..k] {
            v[i] = median;
        }
        done = k;
        out.push(gini(&v)?);
    }
    Ok(out)
}

/// Countries adjusted at `fraction`: floor(fraction · n).
pub fn countries_at(fraction: f64, n: usize) -> usize {
    // the epsilon keeps 0.3 · 10 from flooring to 2
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Runs one scenario with a paired country bootstrap.
///
/// Each replicate resamples countries with replacement and reruns the whole
/// procedure (median, ranking, replacement) on the resample.
pub fn simulate(
    scenario: Scenario,
    national: &NationalTable,
    steps: &[f64],
    cfg: &SimulationConfig,
) -> Result<ScenarioResult> {
    let n = national.rows.len();
    if n < 2 {
        return Err(Error::invalid("simulation needs at least two countries"));
    }
    if steps.is_empty() {
        return Err(Error::invalid("no simulation steps"));
    }
    if steps.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) || steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("steps must be ascending within (0, 1]"));
    }
    if cfg.bootstrap_iters < 2 {
        return Err(Error::invalid("simulation bootstrap needs at least two iterations"));
    }
    let ks: Vec<usize> = steps.iter().map(|f| countries_at(*f, n)).collect();
    if ks[0] == 0 {
        return Err(Error::invalid(format!("step {} adjusts no country out of {n}", steps[0])));
    }
    let pbrs = national.pbrs();
    let parts: Vec<f64> = national.rows.iter().map(|r| r.participants_total).collect();
    let point = run(&pbrs, &parts, &ks, cfg.ranking)?;

    let draws: Vec<Option<Vec<f64>>> = (0..cfg.bootstrap_iters as u64)
        .into_par_iter()
        .map(|b| {
            let idx = resample_indices(cfg.seed, RESAMPLE_STAGE, b, n);
            let p: Vec<f64> = idx.iter().map(|&i| pbrs[i]).collect();
            let q: Vec<f64> = idx.iter().map(|&i| parts[i]).collect();
            run(&p, &q, &ks, cfg.ranking).ok()
        })
        .collect();
    let skipped = draws.iter().filter(|d| d.is_none()).count();
    if skipped * 10 > cfg.bootstrap_iters {
        return Err(Error::Numerical(format!("Gini undefined on {skipped} of {} resamples", cfg.bootstrap_iters)));
    }
    let reps: Vec<Vec<f64>> = draws.into_iter().flatten().collect();
    let replicate_baseline: Vec<f64> = reps.iter().map(|r| r[0]).collect();

    let base = point[0];
    let mut out = Vec::with_capacity(ks.len() + 1);
    for (j, g) in point.iter().enumerate() {
        let pct = reduction(base, *g);
        let replicate_gini: Vec<f64> = reps.iter().map(|r| r[j]).collect();
        let replicate_reduction: Vec<f64> = reps.iter().map(|r| reduction(r[0], r[j])).collect();
        let mut sorted = replicate_reduction.clone();
        sorted.sort_by(f64::total_cmp);
        out.push(Step {
            fraction: if j == 0 { 0.0 } else { steps[j - 1] },
            countries_adjusted: if j == 0 { 0 } else { ks[j - 1] },
            gini: *g,
            pct_reduction: pct,
            ci_low: percentile(&sorted, 2.5).min(pct),
            ci_high: percentile(&sorted, 97.5).max(pct),
            replicate_gini,
            replicate_reduction,
        });
    }
    let last = out.last().expect("at least one step");
    let efficiency = last.pct_reduction / (last.fraction * 100.0);
    let p_value = paired_gini_test(&replicate_baseline, &last.replicate_gini)?;
    Ok(ScenarioResult {
        scenario,
        steps: out,
        efficiency,
        p_value,
        n_countries: n,
        median: national.median,
        replicate_baseline,
        skipped_replicates: skipped,
    })
}

/// Two-sided paired t-test p value; identical samples give 1.
pub fn paired_gini_test(baseline: &[f64], adjusted: &[f64]) -> Result<f64> {
    Ok(paired_t_test(baseline, adjusted)?.p_value)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfficiencyComparison {
    /// Targeted efficiency over full efficiency.
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Paired t-test of per-replicate efficiencies.
    pub p_value: f64,
}

fn replicate_efficiency(r: &ScenarioResult) -> Vec<f64> {
    let last = r.last();
    last.replicate_reduction.iter().map(|x| x / (last.fraction * 100.0)).collect()
}

/// Compares the final-step efficiency of two scenarios run with the same seed.
pub fn efficiency(full: &ScenarioResult, targeted: &ScenarioResult) -> Result<EfficiencyComparison> {
    if full.efficiency == 0.0 {
        return Err(Error::undefined("full-alignment efficiency is zero"));
    }
    if full.n_countries != targeted.n_countries || full.replicate_baseline != targeted.replicate_baseline {
        return Err(Error::invalid("scenarios were not run on the same countries and resamples"));
    }
    let ratio = targeted.efficiency / full.efficiency;
    let (ef, et) = (replicate_efficiency(full), replicate_efficiency(targeted));
    let mut ratios: Vec<f64> = ef.iter().zip(&et).filter(|(f, _)| **f != 0.0).map(|(f, t)| t / f).collect();
    ratios.sort_by(f64::total_cmp);
    let p_value = if ef.len() >= 2 { paired_t_test(&et, &ef)?.p_value } else { f64::NAN };
    Ok(EfficiencyComparison {
        ratio,
        ci_low: percentile(&ratios, 2.5).min(ratio),
        ci_high: percentile(&ratios, 97.5).max(ratio),
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{cc, cell};

    fn three() -> NationalTable {
        // A 10/20, B 30/30, C 60/50 over totals 100/100
        let panel = Panel::from_cells(vec![
            cell("AAA", 0, 2000, 4.0, 5.0),
            cell("AAA", 1, 2001, 6.0, 15.0),
            cell("BBB", 0, 2000, 30.0, 30.0),
            cell("CCC", 1, 2000, 60.0, 50.0),
        ])
        .unwrap();
        national_pbr(&panel, Period::all()).unwrap()
    }

    fn cfg(ranking: Ranking) -> SimulationConfig {
        SimulationConfig { bootstrap_iters: 50, seed: 9, ranking }
    }

    #[test]
    fn national_shares() {
        let t = three();
        let pbr: Vec<f64> = t.pbrs();
        for (got, want) in pbr.iter().zip([0.5, 1.0, 1.2]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(t.median, 1.0);
        assert!((t.rows.iter().map(|r| r.participant_share).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((t.rows.iter().map(|r| r.daly_share).sum::<f64>() - 1.0).abs() < 1e-12);
        // 1.4 / 8.1
        assert!((t.gini - 14.0 / 81.0).abs() < 1e-12);
    }

    #[test]
    fn identical_countries() {
        let panel = Panel::from_cells(vec![cell("AAA", 0, 2000, 5.0, 7.0), cell("BBB", 0, 2000, 5.0, 7.0)]).unwrap();
        let t = national_pbr(&panel, Period::all()).unwrap();
        assert_eq!(t.pbrs(), vec![1.0, 1.0]);
        assert_eq!(t.median, 1.0);
    }

    #[test]
    fn targeted_replaces_furthest_country() {
        let r = simulate(Scenario::Targeted, &three(), &[1.0 / 3.0], &cfg(Ranking::MedianDeviation)).unwrap();
        assert_eq!(r.steps.len(), 2);
        assert_eq!(r.steps[0].pct_reduction, 0.0);
        assert_eq!(r.steps[1].countries_adjusted, 1);
        // [1, 1, 1.2]: 0.4 / 9.6, reduction 1 - 81/336
        assert!((r.steps[1].gini - 1.0 / 24.0).abs() < 1e-12);
        assert!((r.steps[1].pct_reduction - 100.0 * (1.0 - 81.0 / 336.0)).abs() < 1e-9);
        let v = simulate(Scenario::Targeted, &three(), &[1.0 / 3.0], &cfg(Ranking::ParticipantVolume)).unwrap();
        // C goes first: [0.5, 1, 1]
        assert!((v.steps[1].gini - 1.0 / 7.5).abs() < 1e-12);
    }

    #[test]
    fn full_alignment_is_exactly_equal() {
        let r = simulate(Scenario::Full, &three(), Scenario::Full.default_steps(), &cfg(Ranking::MedianDeviation));
        // 0.25 of 3 countries adjusts nobody
        assert!(r.is_err());
        let r = simulate(Scenario::Full, &three(), &[0.5, 1.0], &cfg(Ranking::MedianDeviation)).unwrap();
        assert_eq!(r.last().gini, 0.0);
        assert_eq!(r.last().pct_reduction, 100.0);
        assert!(r.steps.iter().all(|s| s.ci_low <= s.pct_reduction && s.pct_reduction <= s.ci_high));
    }

    #[test]
    fn fixed_point_at_median() {
        let rows = (0..6)
            .map(|i| NationalPbr {
                country: cc(&format!("A{}A", (b'A' + i) as char)),
                participants_total: 1.0,
                dalys_total: 1.0,
                pbr: 1.0,
                participant_share: 1.0 / 6.0,
                daly_share: 1.0 / 6.0,
            })
            .collect();
        let t = NationalTable { rows, median: 1.0, gini: 0.0, excluded: vec![] };
        let r = simulate(Scenario::Targeted, &t, &[0.2, 0.5, 1.0], &cfg(Ranking::MedianDeviation)).unwrap();
        for s in &r.steps {
            assert_eq!((s.gini, s.pct_reduction), (0.0, 0.0));
        }
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn deterministic_and_paired() {
        let t = three();
        let c = cfg(Ranking::MedianDeviation);
        let a = simulate(Scenario::Full, &t, &[1.0 / 3.0, 1.0], &c).unwrap();
        let b = simulate(Scenario::Full, &t, &[1.0 / 3.0, 1.0], &c).unwrap();
        assert_eq!(a, b);
        let tg = simulate(Scenario::Targeted, &t, &[1.0 / 3.0], &c).unwrap();
        assert_eq!(a.replicate_baseline, tg.replicate_baseline);
        let e = efficiency(&a, &tg).unwrap();
        // full: 100 / 100; targeted: 75.89 / 33.3
        assert!((e.ratio - (100.0 * (1.0 - 81.0 / 336.0)) / (100.0 / 3.0)).abs() < 1e-9);
        let same = efficiency(&a, &a).unwrap();
        assert_eq!(same.ratio, 1.0);
        assert_eq!(same.p_value, 1.0);
    }

    #[test]
    fn two_outliers_break_monotonicity() {
        // Aligning the larger outlier leaves the other holding more of the
        // mass, so the Gini rises before it falls.
        let mut pbrs = vec![1.0; 8];
        pbrs.extend([489.0, 535.0]);
        let rows = pbrs
            .iter()
            .enumerate()
            .map(|(i, p)| NationalPbr {
                country: cc(&format!("A{}X", (b'A' + i as u8) as char)),
                participants_total: *p,
                dalys_total: 1.0,
                pbr: *p,
                participant_share: 0.0,
                daly_share: 0.0,
            })
            .collect();
        let t = NationalTable { rows, median: 1.0, gini: gini(&pbrs).unwrap(), excluded: vec![] };
        let r = simulate(Scenario::Full, &t, &[0.1, 0.2], &cfg(Ranking::MedianDeviation)).unwrap();
        assert!(r.steps[1].gini > r.steps[0].gini);
        assert!(r.steps[1].pct_reduction < 0.0);
        assert_eq!(r.steps[2].gini, 0.0);
    }

    #[test]
    fn paired_test_rules() {
        let x = [0.5, 0.6, 0.7];
        assert_eq!(paired_gini_test(&x, &x).unwrap(), 1.0);
        let base: Vec<f64> = (0..200).map(|i| 0.5 + 0.001 * (i % 7) as f64).collect();
        let shifted: Vec<f64> = base.iter().enumerate().map(|(i, b)| b - 0.1 + 1e-4 * (i % 3) as f64).collect();
        assert!(paired_gini_test(&base, &shifted).unwrap() < 1e-12);
    }

    #[test]
    fn zero_participant_country_ranks_first() {
        let panel = Panel::from_cells(vec![
            cell("AAA", 0, 2000, 5.0, 7.0),
            cell("BBB", 0, 2000, 3.0, 2.0),
            cell("CCC", 0, 2000, 0.0, 1.0),
            cell("DDD", 0, 2000, 4.0, 4.0),
        ])
        .unwrap();
        let t = national_pbr(&panel, Period::all()).unwrap();
        assert_eq!(t.rows[2].pbr, 0.0);
        let order = adjustment_order(&t.pbrs(), &[5.0, 3.0, 0.0, 4.0], t.median, Ranking::MedianDeviation);
        assert_eq!(order[0], 2);
    }
}
