use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{NetworkMetrics, ResearchGraph};
use crate::classify::Factor;
use crate::counterfactual::ScenarioResult;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::percentile;

/// Metrics carried through the sensitivity model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolvableMetrics {
    pub density: f64,
    pub factor_homophily: f64,
    pub modularity: f64,
    pub avg_path_length: f64,
}

impl From<&NetworkMetrics> for EvolvableMetrics {
    fn from(m: &NetworkMetrics) -> Self {
        EvolvableMetrics {
            density: m.density,
            factor_homophily: m.factor_homophily,
            modularity: m.modularity,
            avg_path_length: m.avg_path_length,
        }
    }
}

/// Linear response of each metric to the fractional Gini reduction, plus the
/// relative noise schedule used for uncertainty bands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensitivityModel {
    pub density: f64,
    pub factor_homophily: f64,
    pub modularity: f64,
    pub avg_path_length: f64,
    /// Relative noise at the first step.
    pub noise_start: f64,
    /// Relative noise at the last step.
    pub noise_end: f64,
}

impl Default for SensitivityModel {
    fn default() -> Self {
        SensitivityModel {
            density: 0.220,
            factor_homophily: -0.209,
            modularity: -0.042,
            avg_path_length: -0.085,
            noise_start: 0.10,
            noise_end: 0.15,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolvedStep {
    pub delta_g: f64,
    pub noise_level: f64,
    pub density: Estimate,
    pub factor_homophily: Estimate,
    pub modularity: Estimate,
    pub avg_path_length: Estimate,
}

/// Fractional Gini reduction at each scenario step, baseline included.
pub fn delta_g_from(result: &ScenarioResult) -> Vec<f64> {
    result.steps.iter().map(|s| s.pct_reduction / 100.0).collect()
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Projects metrics along `delta_g` as M + β·ΔG.
///
/// Density and homophily are clamped to [0, 1]. With `noise_bootstrap > 0`
/// each step also gets a parametric interval from Gaussian noise whose
/// standard deviation is the scheduled fraction of the projected value;
/// with 0 the interval collapses onto the point.
pub fn evolve(
    baseline: &EvolvableMetrics,
    model: &SensitivityModel,
    delta_g: &[f64],
    noise_bootstrap: usize,
    seed: u64,
) -> Result<Vec<EvolvedStep>> {
    if delta_g.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("Gini reduction fractions must be finite"));
    }
    let last = delta_g.len().saturating_sub(1).max(1) as f64;
    let out = delta_g
        .iter()
        .enumerate()
        .map(|(s, &dg)| {
            let level = model.noise_start + (model.noise_end - model.noise_start) * s as f64 / last;
            let mut rng = rng::stream(seed, "network-evolve", s as u64);
            let mut project = |base: f64, beta: f64, clamp: fn(f64) -> f64| {
                let value = clamp(base + beta * dg);
                if noise_bootstrap == 0 || value == 0.0 {
                    return Estimate { value, ci_low: value, ci_high: value };
                }
                let normal = Normal::new(0.0, level * value.abs()).expect("finite positive sd");
                let mut draws: Vec<f64> = (0..noise_bootstrap).map(|_| clamp(value + normal.sample(&mut rng))).collect();
                draws.sort_by(f64::total_cmp);
                Estimate { value, ci_low: percentile(&draws, 2.5), ci_high: percentile(&draws, 97.5) }
            };
            EvolvedStep {
                delta_g: dg,
                noise_level: level,
                density: project(baseline.density, model.density, clamp_unit),
                factor_homophily: project(baseline.factor_homophily, model.factor_homophily, clamp_unit),
                modularity: project(baseline.modularity, model.modularity, |x| x),
                avg_path_length: project(baseline.avg_path_length, model.avg_path_length, |x| x),
            }
        })
        .collect();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorPairCount {
    pub a: Factor,
    pub b: Factor,
    pub baseline: usize,
    pub evolved: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdgeRedistribution {
    pub total: usize,
    pub baseline_within: usize,
    pub baseline_cross: usize,
    pub within: f64,
    pub cross: f64,
    pub within_share: f64,
    /// Unordered factor pairs (a ≤ b) present in the node set.
    pub pairs: Vec<FactorPairCount>,
}

/// Splits the baseline edge count into within- and cross-factor classes at
/// the evolved homophily, holding the total fixed.
///
/// Each factor pair keeps its share of its class. A class that is empty at
/// baseline spreads evenly over its possible pairs.
pub fn edge_redistribution(graph: &ResearchGraph, evolved_homophily: f64) -> Result<EdgeRedistribution> {
    if !(0.0..=1.0).contains(&evolved_homophily) {
        return Err(Error::invalid("homophily must lie in [0, 1]"));
    }
    let mut factors: Vec<Factor> = graph.nodes.iter().map(|n| n.factor).collect();
    factors.sort();
    factors.dedup();
    let mut counts: BTreeMap<(Factor, Factor), usize> = BTreeMap::new();
    for (i, a) in factors.iter().enumerate() {
        for b in &factors[i..] {
            counts.insert((*a, *b), 0);
        }
    }
    for e in &graph.edges {
        let (x, y) = (graph.nodes[e.source].factor, graph.nodes[e.target].factor);
        *counts.get_mut(&(x.min(y), x.max(y))).expect("pair listed") += 1;
    }
    let total = graph.n_edges();
    let baseline_within: usize = counts.iter().filter(|((a, b), _)| a == b).map(|(_, c)| c).sum();
    let baseline_cross = total - baseline_within;
    let within = total as f64 * evolved_homophily;
    let cross = total as f64 - within;
    let scale = |is_within: bool, c: usize| {
        let (base, new) = if is_within { (baseline_within, within) } else { (baseline_cross, cross) };
        if base > 0 {
            c as f64 * new / base as f64
        } else {
            let k = counts.keys().filter(|(a, b)| (a == b) == is_within).count();
            new / k as f64
        }
    };
    let pairs = counts
        .iter()
        .map(|(&(a, b), &c)| FactorPairCount { a, b, baseline: c, evolved: scale(a == b, c) })
        .collect();
    Ok(EdgeRedistribution {
        total,
        baseline_within,
        baseline_cross,
        within,
        cross,
        within_share: evolved_homophily,
        pairs,
    })
}
