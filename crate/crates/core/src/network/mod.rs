//! Country-factor research network.
//!
//! Nodes are distinct (country, limiting factor) combinations; two nodes are
//! joined when they share at least `min_weight` diseases, with the shared
//! count as the edge weight.

mod evolve;
mod louvain;

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

pub use evolve::{
    delta_g_from, edge_redistribution, evolve, EdgeRedistribution, Estimate, EvolvableMetrics, EvolvedStep,
    FactorPairCount, SensitivityModel,
};
pub use louvain::{louvain, louvain_restarts, modularity, Partition};

use crate::classify::{status_of, ClassifiedPair, Factor, Status, Thresholds};
use crate::error::{Error, Result};
use crate::panel::{CountryCode, DiseaseCategory};

/// How pair statuses collapse onto a country-factor node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusRule {
    /// Most frequent pair status; ties go to the earlier status.
    #[default]
    Modal,
    /// Status of the mean pair residual.
    MeanResidual,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Node {
    pub country: CountryCode,
    pub factor: Factor,
    pub status: Status,
    pub diseases: Vec<DiseaseCategory>,
    pub mean_residual: f64,
    #[serde(skip)]
    mask: u64,
}

impl Node {
    pub fn new(country: CountryCode, factor: Factor, status: Status, mut diseases: Vec<DiseaseCategory>, mean_residual: f64) -> Self {
        diseases.sort();
        diseases.dedup();
        let mask = diseases.iter().fold(0u64, |m, d| m | 1 << d.id());
        Node { country, factor, status, diseases, mean_residual, mask }
    }

    pub fn disease_count(&self) -> usize {
        self.diseases.len()
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.country, self.factor.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResearchGraph {
    pub nodes: Vec<Node>,
    /// `source < target`, sorted.
    pub edges: Vec<Edge>,
    pub min_weight: u32,
}

/// Builds the country-factor graph from classified pairs.
///
/// Nodes are ordered by (country, factor).
pub fn build_graph(pairs: &[ClassifiedPair], min_weight: u32, rule: StatusRule, t: &Thresholds) -> Result<ResearchGraph> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if min_weight == 0 {
        return Err(Error::invalid("minimum edge weight must be at least 1"));
    }
    let mut groups: BTreeMap<(CountryCode, Factor), Vec<&ClassifiedPair>> = BTreeMap::new();
    for p in pairs {
        groups.entry((p.country, p.factor)).or_default().push(p);
    }
    let nodes: Vec<Node> = groups
        .into_iter()
        .map(|((country, factor), members)| {
            let diseases: Vec<DiseaseCategory> = members.iter().map(|p| p.disease).collect();
            let mean_residual = members.iter().map(|p| p.residual).sum::<f64>() / members.len() as f64;
            let status = match rule {
                StatusRule::MeanResidual => status_of(mean_residual, t),
                StatusRule::Modal => {
                    let mut counts: BTreeMap<Status, usize> = BTreeMap::new();
                    for p in &members {
                        *counts.entry(p.status).or_default() += 1;
                    }
                    let max = *counts.values().max().expect("group is nonempty");
                    counts.into_iter().find(|(_, c)| *c == max).expect("max exists").0
                }
            };
            Node::new(country, factor, status, diseases, mean_residual)
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let w = (nodes[i].mask & nodes[j].mask).count_ones();
            if w >= min_weight {
                edges.push(Edge { source: i, target: j, weight: w });
            }
        }
    }
    Ok(ResearchGraph { nodes, edges, min_weight })
}

impl ResearchGraph {
    /// Graph from explicit nodes and edges, as read back from CSV.
    pub fn from_parts(nodes: Vec<Node>, mut edges: Vec<Edge>, min_weight: u32) -> Result<Self> {
        for e in &mut edges {
            if e.source == e.target {
                return Err(Error::invalid("self-loop in edge list"));
            }
            if e.source.max(e.target) >= nodes.len() {
                return Err(Error::invalid("edge endpoint out of range"));
            }
            if e.source > e.target {
                std::mem::swap(&mut e.source, &mut e.target);
            }
        }
        edges.sort_by_key(|e| (e.source, e.target));
        if edges.windows(2).any(|w| (w[0].source, w[0].target) == (w[1].source, w[1].target)) {
            return Err(Error::invalid("duplicate edge"));
        }
        Ok(ResearchGraph { nodes, edges, min_weight })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Unweighted neighbor lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.source].push(e.target);
            adj[e.target].push(e.source);
        }
        adj
    }

    /// Connected components, each sorted, largest first (ties by first node).
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.neighbors();
        let mut seen = vec![false; self.nodes.len()];
        let mut out = Vec::new();
        for s in 0..self.nodes.len() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkMetrics {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub density: f64,
    pub factor_homophily: f64,
    pub status_homophily: f64,
    /// Undefined when every edge joins nodes of equal degree.
    pub degree_assortativity: Option<f64>,
    /// Undefined when one factor covers every edge end.
    pub factor_assortativity: Option<f64>,
    pub avg_clustering: f64,
    pub modularity: f64,
    pub community_sizes: Vec<usize>,
    pub avg_path_length: f64,
    pub diameter: usize,
    pub n_components: usize,
    /// Path metrics were computed on the largest component only.
    pub path_on_largest_component: bool,
}

/// Structural metrics of the graph; modularity comes from a seeded Louvain run.
pub fn metrics(graph: &ResearchGraph, seed: u64) -> Result<NetworkMetrics> {
    metrics_with(graph, &louvain(graph, seed))
}

/// Structural metrics with modularity and community sizes taken from `part`.
pub fn metrics_with(graph: &ResearchGraph, part: &Partition) -> Result<NetworkMetrics> {
    if part.membership.len() != graph.n_nodes() {
        return Err(Error::invalid("partition does not cover the graph's nodes"));
    }
    let n = graph.n_nodes();
    if n < 2 {
        return Err(Error::undefined("network metrics need at least two nodes"));
    }
    let e = graph.n_edges();
    let density = 2.0 * e as f64 / (n as f64 * (n as f64 - 1.0));
    let same = |f: &dyn Fn(&Node) -> u8| {
        if e == 0 {
            return 0.0;
        }
        let k = graph.edges.iter().filter(|x| f(&graph.nodes[x.source]) == f(&graph.nodes[x.target])).count();
        k as f64 / e as f64
    };
    let factor_homophily = same(&|v| v.factor as u8);
    let status_homophily = same(&|v| v.status as u8);

    let adj = graph.neighbors();
    let degree: Vec<f64> = adj.iter().map(|a| a.len() as f64).collect();
    let degree_assortativity = edge_pearson(graph, &degree);
    let factor_assortativity = categorical_assortativity(graph, |v| v.factor as usize);
    let avg_clustering = clustering(n, &adj);

    let comps = graph.components();
    let largest = &comps[0];
    if largest.len() < 2 {
        return Err(Error::undefined("no component has two nodes; path metrics undefined"));
    }
    let (avg_path_length, diameter) = path_stats(&adj, largest);
    Ok(NetworkMetrics {
        n_nodes: n,
        n_edges: e,
        density,
        factor_homophily,
        status_homophily,
        degree_assortativity,
        factor_assortativity,
        avg_clustering,
        modularity: part.modularity,
        community_sizes: part.sizes(),
        avg_path_length,
        diameter,
        n_components: comps.len(),
        path_on_largest_component: comps.len() > 1,
    })
}

/// Pearson correlation of a node attribute across both orientations of every edge.
fn edge_pearson(graph: &ResearchGraph, x: &[f64]) -> Option<f64> {
    let m = 2.0 * graph.n_edges() as f64;
    if m == 0.0 {
        return None;
    }
    let (mut s, mut ss, mut sp) = (0.0, 0.0, 0.0);
    for e in &graph.edges {
        let (a, b) = (x[e.source], x[e.target]);
        s += a + b;
        ss += a * a + b * b;
        sp += 2.0 * a * b;
    }
    let mean = s / m;
    let var = ss / m - mean * mean;
    if var <= 1e-12 * (ss / m).max(1.0) {
        return None;
    }
    Some((sp / m - mean * mean) / var)
}

/// Newman's assortativity coefficient for a categorical node attribute.
fn categorical_assortativity(graph: &ResearchGraph, class: impl Fn(&Node) -> usize) -> Option<f64> {
    if graph.n_edges() == 0 {
        return None;
    }
    let mut mix: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut marg: BTreeMap<usize, f64> = BTreeMap::new();
    let m = 2.0 * graph.n_edges() as f64;
    for e in &graph.edges {
        let (a, b) = (class(&graph.nodes[e.source]), class(&graph.nodes[e.target]));
        *mix.entry((a, b)).or_default() += 1.0 / m;
        *mix.entry((b, a)).or_default() += 1.0 / m;
        *marg.entry(a).or_default() += 1.0 / m;
        *marg.entry(b).or_default() += 1.0 / m;
    }
    let trace: f64 = mix.iter().filter(|((a, b), _)| a == b).map(|(_, v)| v).sum();
    let aa: f64 = marg.values().map(|a| a * a).sum();
    if (1.0 - aa).abs() < 1e-12 {
        return None;
    }
    Some((trace - aa) / (1.0 - aa))
}

/// Mean local clustering coefficient; nodes of degree < 2 count as 0.
fn clustering(n: usize, adj: &[Vec<usize>]) -> f64 {
    let mut linked = vec![false; n * n];
    for (u, nb) in adj.iter().enumerate() {
        for &v in nb {
            linked[u * n + v] = true;
        }
    }
    let total: f64 = adj
        .iter()
        .map(|nb| {
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut t = 0usize;
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    t += linked[a * n + b] as usize;
                }
            }
            2.0 * t as f64 / (k * (k - 1)) as f64
        })
        .sum();
    total / n as f64
}

/// Mean shortest-path length and diameter over ordered pairs within `nodes`.
fn path_stats(adj: &[Vec<usize>], nodes: &[usize]) -> (f64, usize) {
    let mut dist = vec![usize::MAX; adj.len()];
    let (mut sum, mut pairs, mut diameter) = (0usize, 0usize, 0usize);
    for &s in nodes {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        for &t in nodes {
            if t != s {
                sum += dist[t];
                pairs += 1;
                diameter = diameter.max(dist[t]);
            }
        }
    }
    (sum as f64 / pairs as f64, diameter)
}
