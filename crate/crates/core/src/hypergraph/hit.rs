//! `hit(H)`: the probability that a random set contains at least one edge.

use std::collections::HashMap;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::Hypergraph;
use crate::error::{param, Error, Result};
use crate::rng::fork_seed;
use crate::setcore::{binom, enumerate_k_subsets, sample_k_subset, VertexSet};
use crate::stats::{sharded_count, Estimate};

/// Largest `C(n, k)` for which uniform mode falls back to full enumeration.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;
/// Largest edge count for inclusion-exclusion.
pub const INCLUSION_EXCLUSION_MAX_EDGES: usize = 20;
/// Largest number of distinct vertices for vertex-branching DNF counting.
pub const DNF_MAX_VERTICES: usize = 30;
/// Recursion nodes the DNF counter may visit before giving up.
pub const DNF_NODE_BUDGET: usize = 2_000_000;

/// Distribution of the random set `S`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HitMode {
    /// `S` uniform among the `k`-subsets of `[n]`.
    Uniform { n: usize, k: usize },
    /// `S ~ mu_p`.
    Biased { p: f64 },
}

impl HitMode {
    fn validate(&self, h: &Hypergraph) -> Result<()> {
        match *self {
            HitMode::Uniform { n, k } => {
                if k > n {
                    return param(format!("uniform mode with k = {k} > n = {n}"));
                }
                if !h.vertices().fits(n) {
                    return param(format!("hypergraph has vertices outside [0, {n})"));
                }
            }
            HitMode::Biased { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return param(format!("bias p = {p} outside [0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// Probability that `S` contains a fixed set of `u` elements.
    fn contains_prob(&self, u: usize) -> f64 {
        match *self {
            HitMode::Uniform { n, k } => {
                if u > k {
                    0.0
                } else {
                    (0..u).map(|i| (k - i) as f64 / (n - i) as f64).product()
                }
            }
            HitMode::Biased { p } => p.powi(u as i32),
        }
    }
}

/// Thresholds for the exact strategy ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactLimits {
    pub dnf_max_vertices: usize,
    pub dnf_node_budget: usize,
    pub inclusion_exclusion_max_edges: usize,
    pub enumeration_limit: u128,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits {
            dnf_max_vertices: DNF_MAX_VERTICES,
            dnf_node_budget: DNF_NODE_BUDGET,
            inclusion_exclusion_max_edges: INCLUSION_EXCLUSION_MAX_EDGES,
            enumeration_limit: ENUMERATION_LIMIT,
        }
    }
}

/// Exact `Pr[H|_S != ∅]`.
///
/// Strategies in order: vertex-branching DNF counting (few distinct
/// vertices), inclusion-exclusion (few edges), full enumeration (uniform mode,
/// `C(n,k)` small). Anything else is [`Error::ExactInfeasible`]; use [`hit_mc`].
pub fn hit_exact(h: &Hypergraph, mode: HitMode) -> Result<f64> {
    hit_exact_with(h, mode, ExactLimits::default())
}

pub fn hit_exact_with(h: &Hypergraph, mode: HitMode, limits: ExactLimits) -> Result<f64> {
    mode.validate(h)?;
    if h.is_empty() {
        return Ok(0.0);
    }
    if h.has_empty_edge() {
        return Ok(1.0);
    }
    let edges = minimal_edges(h.edges().to_vec());
    let vertices = h.vertices().len();
    if vertices <= limits.dnf_max_vertices {
        let (m, j) = match mode {
            HitMode::Uniform { n, k } => (n, k),
            HitMode::Biased { .. } => (0, 0),
        };
        let mut counter = DnfCounter::new(mode, limits.dnf_node_budget);
        if let Some(avoid) = counter.avoid(edges.clone(), m, j) {
            return Ok((1.0 - avoid).clamp(0.0, 1.0));
        }
    }
    if edges.len() <= limits.inclusion_exclusion_max_edges {
        return Ok(inclusion_exclusion(&edges, mode).clamp(0.0, 1.0));
    }
    if let HitMode::Uniform { n, k } = mode {
        let total = binom(n, k);
        if total <= limits.enumeration_limit {
            let hits = enumerate_k_subsets(n, k).filter(|s| edges.iter().any(|e| e.is_subset(s))).count();
            return Ok(hits as f64 / total as f64);
        }
    }
    Err(Error::ExactInfeasible(format!(
        "{} edges on {} vertices exceed the exact envelope; use hit_mc",
        h.len(),
        vertices
    )))
}

/// Monte Carlo estimate of `hit(H)` with a Wilson 95% half-width.
pub fn hit_mc<R: RngCore + ?Sized>(h: &Hypergraph, mode: HitMode, samples: usize, rng: &mut R) -> Result<Estimate> {
    mode.validate(h)?;
    if samples < 100 {
        return param(format!("hit_mc needs at least 100 samples, got {samples}"));
    }
    if h.is_empty() {
        return Ok(Estimate::exact(0.0));
    }
    if h.has_empty_edge() {
        return Ok(Estimate::exact(1.0));
    }
    let seed = fork_seed(rng);
    let edges = minimal_edges(h.edges().to_vec());
    let hits = match mode {
        HitMode::Uniform { n, k } => sharded_count(samples, seed, "hit", |r| {
            let s = sample_k_subset(n, k, r).expect("validated k <= n");
            edges.iter().any(|e| e.is_subset(&s))
        }),
        HitMode::Biased { p } => {
            // Only the vertices touched by some edge matter.
            let support = h.vertices().to_vec();
            sharded_count(samples, seed, "hit", |r| {
                let s: VertexSet = support.iter().copied().filter(|_| r.gen::<f64>() < p).collect();
                edges.iter().any(|e| e.is_subset(&s))
            })
        }
    };
    Ok(Estimate::from_counts(hits, samples))
}

/// Drop every edge that strictly contains another edge; containing a
/// superset implies containing the subset, so `hit` is unchanged.
fn minimal_edges(mut edges: Vec<VertexSet>) -> Vec<VertexSet> {
    edges.sort_by_key(|e| e.len());
    edges.dedup();
    let mut kept: Vec<VertexSet> = Vec::with_capacity(edges.len());
    for e in edges {
        if !kept.iter().any(|k| k.is_subset(&e)) {
            kept.push(e);
        }
    }
    kept.sort();
    kept
}

fn inclusion_exclusion(edges: &[VertexSet], mode: HitMode) -> f64 {
    fn walk(edges: &[VertexSet], start: usize, union: &VertexSet, depth: usize, mode: HitMode, acc: &mut f64) {
        for i in start..edges.len() {
            let u = union.union(&edges[i]);
            let term = mode.contains_prob(u.len());
            if depth.is_multiple_of(2) {
                *acc += term;
            } else {
                *acc -= term;
            }
            if term > 0.0 {
                walk(edges, i + 1, &u, depth + 1, mode, acc);
            }
        }
    }
    let mut acc = 0.0;
    walk(edges, 0, &VertexSet::new(), 0, mode, &mut acc);
    acc
}

/// Probability that `S` contains no edge, by branching on the most frequent
/// vertex: `v ∈ S` shrinks the edges through `v`, `v ∉ S` deletes them.
/// In uniform mode the state carries the number `m` of undecided ground
/// elements and the number `j` still to be picked, so `Pr[v ∈ S] = j / m`.
/// In biased mode independent components are multiplied.
struct DnfCounter {
    mode: HitMode,
    budget: usize,
    nodes: usize,
    memo: HashMap<(Vec<VertexSet>, usize, usize), f64>,
}

impl DnfCounter {
    fn new(mode: HitMode, budget: usize) -> Self {
        DnfCounter { mode, budget, nodes: 0, memo: HashMap::new() }
    }

    /// `edges` are minimal and non-empty. Returns `None` when over budget.
    fn avoid(&mut self, edges: Vec<VertexSet>, m: usize, j: usize) -> Option<f64> {
        if edges.is_empty() {
            return Some(1.0);
        }
        if let HitMode::Uniform { .. } = self.mode {
            if j == 0 {
                return Some(1.0);
            }
        }
        let key = (edges, m, j);
        if let Some(&v) = self.memo.get(&key) {
            return Some(v);
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return None;
        }
        let edges = key.0.clone();
        let value = match self.mode {
            HitMode::Biased { p } => {
                let components = split_components(&edges);
                if components.len() > 1 {
                    let mut prod = 1.0;
                    for c in components {
                        prod *= self.avoid(c, 0, 0)?;
                    }
                    prod
                } else {
                    self.branch(&edges, p, 0, 0)?
                }
            }
            HitMode::Uniform { .. } => {
                let p_in = j as f64 / m as f64;
                self.branch(&edges, p_in, m, j)?
            }
        };
        self.memo.insert(key, value);
        Some(value)
    }

    fn branch(&mut self, edges: &[VertexSet], p_in: f64, m: usize, j: usize) -> Option<f64> {
        let v = most_frequent_vertex(edges);
        let pivot = VertexSet::singleton(v);
        let uniform = matches!(self.mode, HitMode::Uniform { .. });
        let (next_m, in_j) = if uniform { (m - 1, j.saturating_sub(1)) } else { (0, 0) };

        // v in S: an edge equal to {v} is hit outright
        let included = if edges.contains(&pivot) {
            0.0
        } else if p_in > 0.0 {
            let shrunk = minimal_edges(edges.iter().map(|e| e.difference(&pivot)).collect());
            self.avoid(shrunk, next_m, in_j)?
        } else {
            0.0
        };
        let excluded = if p_in < 1.0 {
            let kept: Vec<VertexSet> = edges.iter().filter(|e| !e.contains(v)).cloned().collect();
            self.avoid(kept, next_m, j)?
        } else {
            0.0
        };
        Some(p_in * included + (1.0 - p_in) * excluded)
    }
}

fn most_frequent_vertex(edges: &[VertexSet]) -> usize {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for e in edges {
        for v in e {
            *counts.entry(v).or_insert(0) += 1;
        }
    }
    counts.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map(|(v, _)| v).expect("non-empty edges")
}

/// Group edges into vertex-connected components.
fn split_components(edges: &[VertexSet]) -> Vec<Vec<VertexSet>> {
    let mut groups: Vec<(VertexSet, Vec<VertexSet>)> = Vec::new();
    for e in edges {
        let mut merged = (e.clone(), vec![e.clone()]);
        let mut i = 0;
        while i < groups.len() {
            if !groups[i].0.is_disjoint(&merged.0) {
                let (verts, mut members) = groups.swap_remove(i);
                merged.0 = merged.0.union(&verts);
                merged.1.append(&mut members);
            } else {
                i += 1;
            }
        }
        groups.push(merged);
    }
    groups
        .into_iter()
        .map(|(_, mut es)| {
            es.sort();
            es
        })
        .collect()
}
