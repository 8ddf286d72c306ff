use rand::seq::SliceRandom;
use serde::Serialize;

use super::ResearchGraph;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partition {
    /// Community of each node, numbered by first appearance.
    pub membership: Vec<usize>,
    pub modularity: f64,
}

impl Partition {
    pub fn n_communities(&self) -> usize {
        self.membership.iter().max().map_or(0, |m| m + 1)
    }

    /// Community sizes, largest first.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_communities()];
        for &c in &self.membership {
            s[c] += 1;
        }
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }
}

/// Weighted modularity Σ_c [w_in(c)/m − (k_c / 2m)²] of a node labelling.
///
/// Zero for a graph without edges.
pub fn modularity(graph: &ResearchGraph, membership: &[usize]) -> f64 {
    let m: f64 = graph.edges.iter().map(|e| e.weight as f64).sum();
    if m == 0.0 {
        return 0.0;
    }
    let nc = membership.iter().max().map_or(0, |x| x + 1);
    let (mut inside, mut tot) = (vec![0.0; nc], vec![0.0; nc]);
    for e in &graph.edges {
        let w = e.weight as f64;
        let (a, b) = (membership[e.source], membership[e.target]);
        if a == b {
            inside[a] += w;
        }
        tot[a] += w;
        tot[b] += w;
    }
    inside.iter().zip(&tot).map(|(i, t)| i / m - (t / (2.0 * m)).powi(2)).sum()
}

/// Weighted graph at one aggregation level; `loops[i]` is internal weight.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    loops: Vec<f64>,
}

impl Level {
    fn strength(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|(_, w)| w).sum::<f64>() + 2.0 * self.loops[i]
    }
}

/// Local moving phase. Returns community labels (dense) and whether any node moved.
fn local_moves(level: &Level, m: f64, seed: u64, pass: u64, restart: u64) -> (Vec<usize>, bool) {
    let n = level.adj.len();
    let k: Vec<f64> = (0..n).map(|i| level.strength(i)).collect();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut tot = k.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &format!("louvain-{restart}"), pass));
    let mut link = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut moved_any = false;
    loop {
        let mut moved = false;
        for &i in &order {
            let own = comm[i];
            touched.clear();
            for &(j, w) in &level.adj[i] {
                let c = comm[j];
                if !touched.contains(&c) {
                    touched.push(c);
                }
                link[c] += w;
            }
            tot[own] -= k[i];
            let gain = |c: usize, link: &[f64]| link[c] - tot[c] * k[i] / (2.0 * m);
            let mut best = own;
            let mut best_gain = gain(own, &link);
            for &c in &touched {
                let g = gain(c, &link);
                if g > best_gain + 1e-12 {
                    best = c;
                    best_gain = g;
                }
            }
            tot[best] += k[i];
            if best != own {
                comm[i] = best;
                moved = true;
                moved_any = true;
            }
            for &c in &touched {
                link[c] = 0.0;
            }
            link[own] = 0.0;
        }
        if !moved {
            break;
        }
    }
    (relabel(&comm), moved_any)
}

fn relabel(comm: &[usize]) -> Vec<usize> {
    let mut map = vec![usize::MAX; comm.len()];
    let mut next = 0;
    comm.iter()
        .map(|&c| {
            if map[c] == usize::MAX {
                map[c] = next;
                next += 1;
            }
            map[c]
        })
        .collect()
}

fn aggregate(level: &Level, comm: &[usize]) -> Level {
    let nc = comm.iter().max().map_or(0, |x| x + 1);
    let mut loops = vec![0.0; nc];
    let mut between: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); nc];
    for (i, nb) in level.adj.iter().enumerate() {
        loops[comm[i]] += level.loops[i];
        for &(j, w) in nb {
            let (a, b) = (comm[i], comm[j]);
            if a == b {
                // each internal edge is seen from both ends
                loops[a] += w / 2.0;
            } else {
                *between[a].entry(b).or_default() += w;
            }
        }
    }
    Level { adj: between.into_iter().map(|m| m.into_iter().collect()).collect(), loops }
}

/// Louvain community detection on edge weights.
///
/// Node visiting order is shuffled from `seed`; moves need a strictly
/// positive modularity gain, so the result never scores below the
/// all-singletons partition.
pub fn louvain(graph: &ResearchGraph, seed: u64) -> Partition {
    louvain_restarts(graph, seed, 1)
}

/// Best of `restarts` Louvain runs with independent visiting orders.
pub fn louvain_restarts(graph: &ResearchGraph, seed: u64, restarts: u64) -> Partition {
    let mut best: Option<Partition> = None;
    for r in 0..restarts.max(1) {
        let p = louvain_once(graph, seed, r);
        if best.as_ref().is_none_or(|b| p.modularity > b.modularity + 1e-12) {
            best = Some(p);
        }
    }
    best.expect("at least one restart")
}

fn louvain_once(graph: &ResearchGraph, seed: u64, restart: u64) -> Partition {
    let n = graph.n_nodes();
    let mut adj = vec![Vec::new(); n];
    for e in &graph.edges {
        adj[e.source].push((e.target, e.weight as f64));
        adj[e.target].push((e.source, e.weight as f64));
    }
    let m: f64 = graph.edges.iter().map(|e| e.weight as f64).sum();
    let mut membership: Vec<usize> = (0..n).collect();
    if m == 0.0 {
        return Partition { modularity: 0.0, membership };
    }
    let mut level = Level { adj, loops: vec![0.0; n] };
    for pass in 0.. {
        let (comm, moved) = local_moves(&level, m, seed, pass, restart);
        if !moved {
            break;
        }
        for c in membership.iter_mut() {
            *c = comm[*c];
        }
        level = aggregate(&level, &comm);
    }
    let membership = relabel(&membership);
    Partition { modularity: modularity(graph, &membership), membership }
}
