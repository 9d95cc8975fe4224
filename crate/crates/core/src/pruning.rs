//! Hypergraph pruning: critical-depth decomposition, the two completion
//! steps, the recursive biased-setting pruner, its unique-hit variant, the
//! transfer to uniform `k`-subsets, and a unique-hit verifier.

use std::collections::{HashMap, HashSet};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::hypergraph::{at_least, at_most, hit_exact, hit_mc, tolerant_floor, HitMode, Hypergraph};
use crate::rng::{self, KeyedHash};
use crate::setcore::{power_set, subsets_of_size, VertexSet};
use crate::stats::{EvalMode, Estimate, DEFAULT_SAMPLES};

/// Default guard on `k / n` above which the uniform transfer is not expected to hold.
pub const DEFAULT_P0_GUARD: f64 = 0.15;

/// Upper bound on the number of doublings of the shrink factor `M`.
const MAX_SHRINK_ROUNDS: u32 = 64;

/// How to choose among `H_d, B_1, ..., B_d` in the critical-depth step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Largest (estimated) hit; ties go to `H_d`, then to smaller `r`.
    #[default]
    MaxHit,
    /// First candidate in the order `H_d, B_1, ..., B_d` whose hit reaches `hit(H) / (d + 1)`.
    FirstQualifying,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub c: f64,
    pub p: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub selection_rule: SelectionRule,
}

impl PruneConfig {
    pub fn new(c: f64, p: f64, epsilon: f64) -> Result<Self> {
        let cfg = PruneConfig { c, p, epsilon, selection_rule: SelectionRule::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return param(format!("c must be positive, got {}", self.c));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return param(format!("p must lie in (0, 1), got {}", self.p));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return param(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        Ok(())
    }

    /// The branching budget `c / p`.
    pub fn rho(&self) -> f64 {
        self.c / self.p
    }

    fn with_c(&self, c: f64) -> Self {
        PruneConfig { c, ..*self }
    }
}

/// Evaluates `hit(·)` exactly when the instance is small enough and by Monte
/// Carlo otherwise. Monte Carlo streams are keyed by the hypergraph content,
/// so repeated queries on the same hypergraph give the same answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitOracle {
    pub samples: usize,
    pub seed: u64,
    pub force_mc: bool,
}

impl Default for HitOracle {
    fn default() -> Self {
        HitOracle { samples: DEFAULT_SAMPLES, seed: 0, force_mc: false }
    }
}

impl HitOracle {
    pub fn with_seed(seed: u64) -> Self {
        HitOracle { seed, ..Default::default() }
    }

    pub fn hit(&self, h: &Hypergraph, mode: HitMode) -> Result<Estimate> {
        if !self.force_mc {
            match hit_exact(h, mode) {
                Ok(v) => return Ok(Estimate::exact(v)),
                Err(Error::ExactInfeasible(_)) => {}
                Err(e) => return Err(e),
            }
        }
        let mut stream = rng::stream_from_seed(content_key(self.seed, h));
        hit_mc(h, mode, self.samples, &mut stream)
    }
}

fn content_key(seed: u64, h: &Hypergraph) -> u64 {
    let mut hash = KeyedHash::new(seed).word(h.n() as u64);
    for e in h.edges() {
        hash = hash.word(e.len() as u64).words(e.words());
    }
    hash.finish()
}

/// One level `r` of the critical-depth decomposition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthLevel {
    pub r: usize,
    /// `rho^r`, the extension count that puts a `(d - r)`-set into `B_r`.
    pub threshold: f64,
    pub b: Hypergraph,
    /// Edges of `H_{r-1}` extending some member of `B_r`.
    pub removed: Hypergraph,
    /// `H_r`.
    pub h: Hypergraph,
    pub hit_b: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalDepthTrace {
    pub hit_input: Estimate,
    pub hit_final: Estimate,
    pub levels: Vec<DepthLevel>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum CriticalDepthResult {
    Pruned(Hypergraph),
    Critical { r: usize, i: Hypergraph, h_prev: Hypergraph },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalDepth {
    pub result: CriticalDepthResult,
    pub trace: CriticalDepthTrace,
}

fn require_uniform(h: &Hypergraph, d: usize) -> Result<()> {
    if !h.is_uniform(d) {
        return param(format!("hypergraph is not {d}-uniform"));
    }
    Ok(())
}

/// Split a `d`-uniform `H` into `H_d` and the layers `B_1..B_d` and choose
/// one of them by `cfg.selection_rule`. Hit probabilities are under `mu_p`.
pub fn critical_depth(h: &Hypergraph, d: usize, cfg: &PruneConfig, oracle: &HitOracle) -> Result<CriticalDepth> {
    cfg.validate()?;
    require_uniform(h, d)?;
    let rho = cfg.rho();
    let mode = HitMode::Biased { p: cfg.p };
    let hit_input = oracle.hit(h, mode)?;

    let mut current = h.clone();
    let mut levels = Vec::with_capacity(d);
    for r in 1..=d {
        let threshold = rho.powi(r as i32);
        let mut members: Vec<VertexSet> = current
            .extension_counts(d - r)
            .into_iter()
            .filter(|(_, count)| at_least(*count, threshold))
            .map(|(a, _)| a)
            .collect();
        members.sort();
        let lookup: HashSet<&VertexSet> = members.iter().collect();
        let (removed, kept): (Vec<VertexSet>, Vec<VertexSet>) = current
            .edges()
            .iter()
            .cloned()
            .partition(|e| subsets_of_size(e, d - r).any(|a| lookup.contains(&a)));
        let b = Hypergraph::from_family(h.n(), members)?;
        let hit_b = oracle.hit(&b, mode)?;
        current = Hypergraph::new(h.n(), kept)?;
        debug_assert!(level_guarantee_holds(&current, d, r, rho));
        levels.push(DepthLevel { r, threshold, b, removed: Hypergraph::new(h.n(), removed)?, h: current.clone(), hit_b });
    }
    let hit_final = oracle.hit(&current, mode)?;

    // candidate 0 is H_d, candidate r is B_r
    let hits: Vec<f64> = std::iter::once(hit_final.value).chain(levels.iter().map(|l| l.hit_b.value)).collect();
    let chosen = match cfg.selection_rule {
        SelectionRule::MaxHit => {
            let best = hits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hits.iter().position(|&x| x == best).unwrap_or(0)
        }
        SelectionRule::FirstQualifying => {
            let bar = hit_input.value / (d as f64 + 1.0);
            hits.iter().position(|&x| x >= bar).unwrap_or(0)
        }
    };
    let result = if chosen == 0 {
        CriticalDepthResult::Pruned(current)
    } else {
        let h_prev = if chosen == 1 { h.clone() } else { levels[chosen - 2].h.clone() };
        CriticalDepthResult::Critical { r: chosen, i: levels[chosen - 1].b.clone(), h_prev }
    };
    Ok(CriticalDepth { result, trace: CriticalDepthTrace { hit_input, hit_final, levels } })
}

/// The invariant of the decomposition: every set of size at least `d - r`
/// has at most `rho^(d - |A|)` extensions in `H_r`.
pub fn level_guarantee_holds(h_r: &Hypergraph, d: usize, r: usize, rho: f64) -> bool {
    (d - r..=d).all(|size| {
        let bound = rho.powi((d - size) as i32);
        h_r.extension_counts(size).values().all(|&count| at_most(count, bound))
    })
}

/// Check the hypotheses shared by both completion steps for a `(d - r)`-uniform `I`
/// and a `d`-uniform `H`: every `e ∪ A` (`A` nonempty, disjoint from `e`) has at most
/// `rho^(r - |A|)` extensions in `H`, and `I` has branching factor `rho`.
pub fn check_completion_hypotheses(h_prev: &Hypergraph, i: &Hypergraph, rho: f64) -> Result<()> {
    let Some((d, s)) = completion_sizes(h_prev, i)? else {
        return Ok(());
    };
    // |A| = |e ∪ A| - s, so the bound rho^(r - |A|) only depends on |e ∪ A|
    let members: HashSet<&VertexSet> = i.edges().iter().collect();
    let mut counts: HashMap<VertexSet, usize> = HashMap::new();
    for edge in h_prev.edges() {
        let mut supersets: HashSet<VertexSet> = HashSet::new();
        for e in subsets_of_size(edge, s).filter(|a| members.contains(a)) {
            for a in power_set(&edge.difference(&e)).filter(|a| !a.is_empty()) {
                supersets.insert(e.union(&a));
            }
        }
        for x in supersets {
            *counts.entry(x).or_insert(0) += 1;
        }
    }
    let mut violations: Vec<(VertexSet, usize)> =
        counts.into_iter().filter(|(x, count)| !at_most(*count, rho.powi((d - x.len()) as i32))).collect();
    violations.sort();
    if let Some((x, count)) = violations.into_iter().next() {
        return Err(Error::Structural(format!("{x} has {count} extensions, above rho^{} for rho = {rho}", d - x.len())));
    }
    let report = i.check_branching(rho)?;
    if !report.ok {
        return Err(Error::Structural(format!("I fails branching factor {rho}: {:?}", report.witness)));
    }
    Ok(())
}

/// `(d, s)`: uniformities of `H_prev` and `I`, or `None` when either is empty.
fn completion_sizes(h_prev: &Hypergraph, i: &Hypergraph) -> Result<Option<(usize, usize)>> {
    let (Some(d), Some(s)) = (h_prev.uniform_size(), i.uniform_size()) else {
        if !h_prev.is_empty() && h_prev.uniform_size().is_none() {
            return param("H_prev is not uniform");
        }
        if !i.is_empty() && i.uniform_size().is_none() {
            return param("I is not uniform");
        }
        return Ok(None);
    };
    if s >= d {
        return param(format!("I is {s}-uniform but H_prev is only {d}-uniform"));
    }
    Ok(Some((d, s)))
}

/// `K'`: the edges of `H_prev` that extend at least two edges of `I`.
pub fn complete_multi(h_prev: &Hypergraph, i: &Hypergraph, cfg: &PruneConfig) -> Result<Hypergraph> {
    let Some((_, s)) = completion_sizes(h_prev, i)? else {
        return Ok(Hypergraph::empty(h_prev.n()));
    };
    if cfg!(debug_assertions) {
        check_completion_hypotheses(h_prev, i, cfg.rho())?;
    }
    let members: HashSet<&VertexSet> = i.edges().iter().collect();
    let edges = h_prev
        .edges()
        .iter()
        .filter(|e| subsets_of_size(e, s).filter(|a| members.contains(a)).take(2).count() >= 2)
        .cloned();
    Hypergraph::new(h_prev.n(), edges)
}

/// `K = K' ∪ ⋃ H_e`: every `e ∈ I` is topped up to `⌊rho^r⌋` extensions
/// with the lexicographically smallest extensions of `e` in `H_prev \ K'`.
pub fn complete_fill(h_prev: &Hypergraph, i: &Hypergraph, k_multi: &Hypergraph, cfg: &PruneConfig) -> Result<Hypergraph> {
    let Some((d, s)) = completion_sizes(h_prev, i)? else {
        return Ok(k_multi.clone());
    };
    let quota = tolerant_floor(cfg.rho().powi((d - s) as i32));
    let mut added: Vec<VertexSet> = Vec::new();
    for e in i.edges() {
        let have = k_multi.extensions(e).count();
        let need = quota.saturating_sub(have);
        if need == 0 {
            continue;
        }
        let pool: Vec<&VertexSet> = h_prev.extensions(e).filter(|x| !k_multi.contains_edge(x)).collect();
        if pool.len() < need {
            return Err(Error::InsufficientExtensions { edge: e.clone(), available: pool.len(), needed: need });
        }
        added.extend(pool.into_iter().take(need).cloned());
    }
    Ok(k_multi.union(&Hypergraph::new(h_prev.n(), added)?))
}

/// Diagnostics of one [`prune_biased`] call at the top level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PruneTrace {
    /// Final shrink factor `M`; the critical-depth step ran at `c / M`.
    pub shrink: f64,
    pub rounds: u32,
    /// `None` when `H_d` was kept, else the critical depth `r`.
    pub critical_r: Option<usize>,
}

/// Sub-hypergraph of a `d`-uniform `H` with branching factor `c / p`.
///
/// The critical-depth step runs at `gamma = c / M`; a critical layer `I` is
/// pruned recursively at `gamma`, then completed. `M` starts at 1 and doubles
/// until the completion passes the `c / p` check.
pub fn prune_biased(h: &Hypergraph, cfg: &PruneConfig, oracle: &HitOracle) -> Result<Hypergraph> {
    prune_biased_traced(h, cfg, oracle).map(|(h, _)| h)
}

pub fn prune_biased_traced(h: &Hypergraph, cfg: &PruneConfig, oracle: &HitOracle) -> Result<(Hypergraph, PruneTrace)> {
    cfg.validate()?;
    let Some(d) = h.uniform_size() else {
        if h.is_empty() {
            return Ok((h.clone(), PruneTrace { shrink: 1.0, rounds: 0, critical_r: None }));
        }
        return param("prune_biased needs a uniform hypergraph");
    };
    if d == 0 {
        return Ok((h.clone(), PruneTrace { shrink: 1.0, rounds: 0, critical_r: None }));
    }
    let rho = cfg.rho();
    let mut shrink = 1.0;
    for round in 1..=MAX_SHRINK_ROUNDS {
        let inner = cfg.with_c(cfg.c / shrink);
        let step = critical_depth(h, d, &inner, oracle)?;
        let (candidate, critical_r) = match step.result {
            CriticalDepthResult::Pruned(hd) => (hd, None),
            CriticalDepthResult::Critical { r, i, h_prev } => {
                let i_pruned = prune_biased(&i, &inner, oracle)?;
                let multi = complete_multi(&h_prev, &i_pruned, &inner)?;
                (complete_fill(&h_prev, &i_pruned, &multi, &inner)?, Some(r))
            }
        };
        if candidate.check_branching(rho)?.ok {
            debug!("pruned {} -> {} edges at M = {shrink} (d = {d})", h.len(), candidate.len());
            return Ok((candidate, PruneTrace { shrink, rounds: round, critical_r }));
        }
        shrink *= 2.0;
    }
    warn!("no shrink factor up to 2^{MAX_SHRINK_ROUNDS} passed; returning the empty hypergraph");
    Ok((Hypergraph::empty(h.n()), PruneTrace { shrink, rounds: MAX_SHRINK_ROUNDS, critical_r: None }))
}

/// Result of a unique-hit pruning run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniquePruning {
    pub pruned: Hypergraph,
    /// The branching numerator the run settled on.
    pub c: f64,
    pub p: f64,
    /// Target slack in the biased setting.
    pub epsilon: f64,
    /// Smallest `Pr[H'|_S = {e} | S ⊇ e]` under `mu_p` over surviving edges (1 when none).
    pub min_unique_hit: f64,
    /// Set when `k / n` exceeded the guard in the uniform transfer.
    pub above_guard: bool,
}

/// Prune so that every surviving edge is the unique hit with conditional
/// probability at least `1 - epsilon` under `mu_p`. `c` starts at 1 and
/// halves until that holds; at `c = p` the branching factor is 1, where at
/// most one edge survives and the property is automatic.
pub fn prune_unique_biased(h: &Hypergraph, p: f64, epsilon: f64, oracle: &HitOracle) -> Result<UniquePruning> {
    let mut c = 1.0f64.max(p);
    loop {
        let cfg = PruneConfig::new(c, p, epsilon)?;
        let pruned = prune_biased(h, &cfg, oracle)?;
        let mut min_unique_hit: f64 = 1.0;
        for e in pruned.edges() {
            let u = unique_hit_with_oracle(&pruned, e, HitMode::Biased { p }, oracle)?;
            min_unique_hit = min_unique_hit.min(u.value);
        }
        if min_unique_hit >= 1.0 - epsilon || c <= p {
            return Ok(UniquePruning { pruned, c, p, epsilon, min_unique_hit, above_guard: false });
        }
        c = (c / 2.0).max(p);
    }
}

/// Uniform-setting pruning for `S` a uniform `k`-subset of `[n]`: the biased
/// construction at `p = k / n` with slack `min(epsilon / 2, 1 / 2)`.
pub fn prune_uniform(h: &Hypergraph, n: usize, k: usize, epsilon: f64, oracle: &HitOracle) -> Result<UniquePruning> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return param(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    if h.n() > n {
        return param(format!("hypergraph lives on [{}] but n = {n}", h.n()));
    }
    let d = h.uniform_size().unwrap_or(0);
    if h.uniform_size().is_none() && !h.is_empty() {
        return param("prune_uniform needs a uniform hypergraph");
    }
    if k < 2 * d || k > n || k == 0 {
        return param(format!("need 2d <= k <= n with k > 0, got d = {d}, k = {k}, n = {n}"));
    }
    let p = k as f64 / n as f64;
    if p >= 1.0 {
        return param("k = n leaves nothing to prune against");
    }
    let above_guard = p > DEFAULT_P0_GUARD;
    if above_guard {
        warn!("k / n = {p:.3} exceeds the guard {DEFAULT_P0_GUARD}; the unique-hit transfer may not hold");
    }
    let mut out = prune_unique_biased(h, p, (epsilon / 2.0).min(0.5), oracle)?;
    out.above_guard = above_guard;
    Ok(out)
}

/// `Pr[H'|_S = {e} | S ⊇ e]`, computed as `1 - hit(K)` for
/// `K = link_delete(H' \ {e}, e)` under the conditional law of `S \ e`.
pub fn verify_unique_hit(h: &Hypergraph, e: &VertexSet, mode: HitMode, eval: EvalMode) -> Result<Estimate> {
    let (k_graph, cond) = unique_hit_instance(h, e, mode)?;
    let Some(k_graph) = k_graph else {
        return Ok(Estimate::exact(0.0));
    };
    let miss = match eval {
        EvalMode::Exact => Estimate::exact(hit_exact(&k_graph, cond)?),
        EvalMode::Mc { samples, seed } => hit_mc(&k_graph, cond, samples, &mut rng::stream(seed, "unique-hit", 0))?,
    };
    Ok(Estimate { value: 1.0 - miss.value, ..miss })
}

fn unique_hit_with_oracle(h: &Hypergraph, e: &VertexSet, mode: HitMode, oracle: &HitOracle) -> Result<Estimate> {
    let (k_graph, cond) = unique_hit_instance(h, e, mode)?;
    let Some(k_graph) = k_graph else {
        return Ok(Estimate::exact(0.0));
    };
    let miss = oracle.hit(&k_graph, cond)?;
    Ok(Estimate { value: 1.0 - miss.value, ..miss })
}

/// The link hypergraph `K` and the conditional distribution it is hit under.
/// `None` when another edge lies inside `e`, so `e` can never be the unique hit.
fn unique_hit_instance(h: &Hypergraph, e: &VertexSet, mode: HitMode) -> Result<(Option<Hypergraph>, HitMode)> {
    if !h.contains_edge(e) {
        return param(format!("{e} is not an edge"));
    }
    let others = h.without_edge(e);
    if others.edges().iter().any(|x| x.is_subset(e)) {
        return Ok((None, mode));
    }
    let link = others.link_delete(e);
    match mode {
        HitMode::Biased { .. } => Ok((Some(link), mode)),
        HitMode::Uniform { n, k } => {
            if e.len() > k || !e.fits(n) {
                return param(format!("{e} cannot lie inside a {k}-subset of [{n}]"));
            }
            // relabel [n] \ e onto [0, n - |e|)
            let relabel = |x: &VertexSet| -> VertexSet { x.iter().map(|v| v - e.rank_of(v)).collect() };
            let edges: Vec<VertexSet> = link.edges().iter().map(relabel).collect();
            let ground = n - e.len();
            Ok((Some(Hypergraph::new(ground, edges)?), HitMode::Uniform { n: ground, k: k - e.len() }))
        }
    }
}
