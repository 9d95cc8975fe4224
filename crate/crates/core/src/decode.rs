//! Recovering a global function from a local ensemble.
//!
//! [`plurality_decode`] sets `G(A)` to the most frequent value of `f_S(A)`
//! over sets `S ⊇ A`. [`restricted_decode`] builds the candidate `g_T` level
//! by level from the sets containing a fixed `T`, reporting `δ_i`, `γ(A)` and
//! `ρ(A)` along the way. [`disagreement_rate`] measures how often a table
//! differs from a global candidate.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{GlobalFunction, LocalEnsemble, Regime};
use crate::error::{param, Error, Result};
use crate::rng::{self, KeyedHash};
use crate::setcore::{
    binom, binom_f64, enumerate_k_subsets, enumerate_small_subsets, power_set, sample_biased, sample_biased_superset,
    sample_k_subset, sample_superset, subsets_of_size, Symbol, VertexSet,
};
use crate::stats::{sharded_count, EvalMode, Estimate};

/// Cap on the number of `(A, S)` incidences an exact run may visit.
pub const DECODE_EXACT_LIMIT: f64 = 1e7;
/// Default pool of sampled `S ⊇ T` for [`restricted_decode`].
pub const DEFAULT_POOL: usize = 5_000;
/// Fresh draws used for a pointwise plurality when a frame has no support.
pub const FALLBACK_SAMPLES: usize = 256;

const REL_TIE: f64 = 1e-12;

/// Supersets of `base` that carry a table, with their conditional weights.
fn weighted_supersets(e: &LocalEnsemble, base: &VertexSet) -> Vec<(VertexSet, f64)> {
    let n = e.params().n;
    let rest = base.complement(n);
    match e.regime() {
        Regime::Uniform => subsets_of_size(&rest, e.params().k - base.len()).map(|x| (base.union(&x), 1.0)).collect(),
        Regime::Biased { p } => power_set(&rest)
            .map(|x| {
                let w = p.powi(x.len() as i32) * (1.0 - p).powi((rest.len() - x.len()) as i32);
                (base.union(&x), w)
            })
            .collect(),
    }
}

fn superset_count(e: &LocalEnsemble, base_len: usize) -> f64 {
    let n = e.params().n;
    match e.regime() {
        Regime::Uniform => binom_f64(n - base_len, e.params().k - base_len),
        Regime::Biased { .. } => 2f64.powi((n - base_len) as i32),
    }
}

fn sample_containing<R: Rng + ?Sized>(e: &LocalEnsemble, base: &VertexSet, rng: &mut R) -> VertexSet {
    let n = e.params().n;
    match e.regime() {
        Regime::Uniform => sample_superset(n, e.params().k, base, rng).expect("base fits in a k-set"),
        Regime::Biased { p } => sample_biased_superset(n, p, base, rng),
    }
}

/// Heaviest symbol; ties go to the smallest symbol, or to a keyed choice
/// among the tied symbols when a tie seed is given.
fn pick(votes: &[f64], tie: Option<(u64, &VertexSet)>) -> Symbol {
    let best = votes.iter().cloned().fold(0.0, f64::max);
    let tied: Vec<usize> = (0..votes.len()).filter(|&s| votes[s] >= best * (1.0 - REL_TIE) && votes[s] > 0.0).collect();
    match (tie, tied.len()) {
        (_, 0) => 0,
        (Some((seed, a)), m) if m > 1 => {
            let h = KeyedHash::new(seed).words(a.words()).finish();
            tied[(h % m as u64) as usize] as Symbol
        }
        _ => tied[0] as Symbol,
    }
}

/// Options for [`plurality_decode_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PluralityConfig {
    /// Exact enumeration of every `S ⊇ A`, or that many samples per `A`.
    pub mode: EvalMode,
    /// Breaks ties by a keyed hash instead of toward the smallest symbol.
    pub tie_seed: Option<u64>,
}

/// `G(A)` = most common `f_S(A)` over `S ⊇ A`, ties toward the smallest symbol.
pub fn plurality_decode(e: &LocalEnsemble, mode: EvalMode) -> Result<GlobalFunction> {
    plurality_decode_with(e, PluralityConfig { mode, tie_seed: None })
}

pub fn plurality_decode_with(e: &LocalEnsemble, cfg: PluralityConfig) -> Result<GlobalFunction> {
    let params = *e.params();
    let (n, d, q) = (params.n, params.d, params.alphabet_size);
    if let Regime::Uniform = e.regime() {
        if params.k < d {
            return Err(Error::Structural(format!("no {}-set contains a {d}-point", params.k)));
        }
    }
    let domain: Vec<VertexSet> = enumerate_small_subsets(&VertexSet::full(n), d, e.include_empty()).collect();
    match cfg.mode {
        EvalMode::Exact => {
            let visits: f64 = (0..=d)
                .filter(|&s| s > 0 || e.include_empty())
                .map(|s| binom_f64(n, s) * superset_count(e, s))
                .sum();
            if visits > DECODE_EXACT_LIMIT {
                return Err(Error::ExactInfeasible(format!("{visits:.3e} (A, S) incidences exceed {DECODE_EXACT_LIMIT:.0e}")));
            }
        }
        EvalMode::Mc { samples: 0, .. } => return param("need at least one sample per point"),
        EvalMode::Mc { .. } => {}
    }
    let symbols: Vec<Symbol> = domain
        .par_iter()
        .enumerate()
        .map(|(idx, a)| {
            let mut votes = vec![0.0; q];
            match cfg.mode {
                EvalMode::Exact => {
                    for (s, w) in weighted_supersets(e, a) {
                        votes[e.view_unchecked(s).get(a) as usize] += w;
                    }
                }
                EvalMode::Mc { samples, seed } => {
                    let mut r = rng::stream(seed, "decode", idx as u64);
                    for _ in 0..samples {
                        let s = sample_containing(e, a, &mut r);
                        votes[e.view_unchecked(s).get(a) as usize] += 1.0;
                    }
                }
            }
            pick(&votes, cfg.tie_seed.map(|t| (t, a)))
        })
        .collect();
    let mut g = GlobalFunction::constant(n, d, q, e.include_empty(), 0)?;
    for (a, s) in domain.iter().zip(symbols) {
        g.set(a, s)?;
    }
    Ok(g)
}

fn check_candidate(e: &LocalEnsemble, g: &GlobalFunction) -> Result<()> {
    let p = e.params();
    if g.n() != p.n || g.d() != p.d || g.include_empty() != e.include_empty() {
        return param(format!(
            "candidate on [{}] with d = {} does not match the ensemble on [{}] with d = {}",
            g.n(),
            g.d(),
            p.n,
            p.d
        ));
    }
    Ok(())
}

fn differs(e: &LocalEnsemble, g: &GlobalFunction, s: VertexSet) -> bool {
    let view = e.view_unchecked(s);
    enumerate_small_subsets(view.set(), e.params().d, e.include_empty()).any(|a| view.get(&a) != g.get(&a).expect("shape checked"))
}

/// `Pr_S[f_S ≠ G|_S]` over uniform `k`-sets, or `mu_p` in the biased regime.
pub fn disagreement_rate(e: &LocalEnsemble, g: &GlobalFunction, mode: EvalMode) -> Result<Estimate> {
    check_candidate(e, g)?;
    let n = e.params().n;
    match mode {
        EvalMode::Exact => match e.regime() {
            Regime::Uniform => {
                let k = e.params().k;
                let total = binom(n, k);
                if total as f64 > DECODE_EXACT_LIMIT {
                    return Err(Error::ExactInfeasible(format!("{total} sets exceed {DECODE_EXACT_LIMIT:.0e}")));
                }
                let bad = enumerate_k_subsets(n, k).par_bridge().filter(|s| differs(e, g, s.clone())).count();
                Ok(Estimate::exact(bad as f64 / total as f64))
            }
            Regime::Biased { .. } => {
                if 2f64.powi(n as i32) > DECODE_EXACT_LIMIT {
                    return Err(Error::ExactInfeasible(format!("2^{n} sets exceed {DECODE_EXACT_LIMIT:.0e}")));
                }
                let bad: f64 = weighted_supersets(e, &VertexSet::new())
                    .into_iter()
                    .filter(|(s, _)| differs(e, g, s.clone()))
                    .map(|(_, w)| w)
                    .sum();
                Ok(Estimate::exact(bad))
            }
        },
        EvalMode::Mc { samples, seed } => {
            if samples == 0 {
                return param("need at least one sample");
            }
            let k = e.params().k;
            let regime = e.regime();
            let bad = sharded_count(samples, seed, "disagreement", |r| {
                let s = match regime {
                    Regime::Uniform => sample_k_subset(n, k, r).expect("k <= n"),
                    Regime::Biased { p } => sample_biased(n, p, r),
                };
                differs(e, g, s)
            });
            Ok(Estimate::from_counts(bad, samples))
        }
    }
}

/// `Pr[g1|_S ≠ g2|_S]` over `S ⊇ base` drawn from the ensemble's regime.
/// With `base = T1 ∪ T2` this compares two restricted decoders.
pub fn candidate_disagreement(
    e: &LocalEnsemble,
    g1: &GlobalFunction,
    g2: &GlobalFunction,
    base: &VertexSet,
    mode: EvalMode,
) -> Result<Estimate> {
    check_candidate(e, g1)?;
    check_candidate(e, g2)?;
    let (d, inc) = (e.params().d, e.include_empty());
    let split = |s: &VertexSet| enumerate_small_subsets(s, d, inc).any(|a| g1.get(&a) != g2.get(&a));
    match mode {
        EvalMode::Exact => {
            if superset_count(e, base.len()) > DECODE_EXACT_LIMIT {
                return Err(Error::ExactInfeasible("too many supersets to enumerate".into()));
            }
            let pool = weighted_supersets(e, base);
            let total: f64 = pool.iter().map(|(_, w)| w).sum();
            let bad: f64 = pool.iter().filter(|(s, _)| split(s)).map(|(_, w)| w).sum();
            Ok(Estimate::exact(bad / total))
        }
        EvalMode::Mc { samples, seed } => {
            let bad = sharded_count(samples, seed, "candidate-disagreement", |r| split(&sample_containing(e, base, r)));
            Ok(Estimate::from_counts(bad, samples))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictedConfig {
    /// Exact enumeration of `X_T`, or a pool of that many sampled `S ⊇ T`.
    pub mode: EvalMode,
    /// Abort once `δ_{i-1}` exceeds this. Acceptance runs keep 1/2.
    pub abort_threshold: f64,
}

impl Default for RestrictedConfig {
    fn default() -> Self {
        RestrictedConfig { mode: EvalMode::mc(DEFAULT_POOL, 0), abort_threshold: 0.5 }
    }
}

/// Statistics of one frame `T^(A)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub a: VertexSet,
    /// Share of `X^(i-1)_(A)` whose frame table equals the chosen `g_A`;
    /// `None` when no surviving set contains `A`.
    pub gamma: Option<f64>,
    /// `|X^(i-1)_(A)| / |X_(A)|`; `None` when no set of the pool contains `A`.
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderDiagnostics {
    /// `δ_{-1}, δ_0, …`: entry `i + 1` holds `δ_i`.
    pub delta: Vec<f64>,
    pub frames: Vec<FrameStats>,
    /// Frames whose `g_A` came from a pointwise plurality fallback.
    pub fallback: Vec<VertexSet>,
    pub aborted: bool,
    pub pool_size: usize,
}

impl DecoderDiagnostics {
    pub fn delta_at(&self, i: isize) -> Option<f64> {
        self.delta.get((i + 1) as usize).copied()
    }
}

#[derive(Clone, Debug)]
pub struct RestrictedDecode {
    /// `g_T`, or `None` for `⊥`.
    pub g: Option<GlobalFunction>,
    pub diagnostics: DecoderDiagnostics,
}

#[derive(Default)]
struct FrameTally {
    all: f64,
    alive: f64,
    votes: HashMap<Vec<Symbol>, f64>,
}

/// The incremental decoder `g_T` with its per-level diagnostics.
///
/// Level `i` chooses, for every `A` outside `T` with `|A| = i`, the most
/// popular frame table `f_S|_{T^(A)}` among the sets still consistent with
/// `g` on lower levels, then keeps only the sets that match `g` on every
/// level-`i` frame they contain. Any `|T| ≤ k - d` is accepted; the usual
/// choice is `|T| = t - d`.
pub fn restricted_decode(e: &LocalEnsemble, t_set: &VertexSet, cfg: &RestrictedConfig) -> Result<RestrictedDecode> {
    let params = *e.params();
    let (n, d, q, inc) = (params.n, params.d, params.alphabet_size, e.include_empty());
    if !t_set.fits(n) {
        return param(format!("T = {t_set} is not a subset of [{n}]"));
    }
    if e.regime() == Regime::Uniform && t_set.len() + d > params.k {
        return param(format!("|T| = {} leaves no room for size-{d} frames in {}-sets", t_set.len(), params.k));
    }
    if !(cfg.abort_threshold > 0.0 && cfg.abort_threshold <= 1.0) {
        return param("abort threshold must lie in (0, 1]");
    }

    let (pool, fallback_seed): (Vec<(VertexSet, f64)>, u64) = match cfg.mode {
        EvalMode::Exact => {
            if superset_count(e, t_set.len()) > DECODE_EXACT_LIMIT {
                return Err(Error::ExactInfeasible(format!("X_T for |T| = {} is too large to enumerate", t_set.len())));
            }
            (weighted_supersets(e, t_set), 0)
        }
        EvalMode::Mc { samples, seed } => {
            if samples == 0 {
                return param("the pool needs at least one set");
            }
            let mut r = rng::stream(seed, "restricted-pool", 0);
            ((0..samples).map(|_| (sample_containing(e, t_set, &mut r), 1.0)).collect(), seed)
        }
    };
    let total: f64 = pool.iter().map(|(_, w)| w).sum();
    let outside_t = t_set.complement(n);
    let mut alive = vec![true; pool.len()];
    let mut g: HashMap<VertexSet, Symbol> = HashMap::new();
    let mut diag = DecoderDiagnostics {
        delta: vec![0.0],
        frames: Vec::new(),
        fallback: Vec::new(),
        aborted: false,
        pool_size: pool.len(),
    };

    for i in 0..=d {
        if *diag.delta.last().expect("starts with δ_{-1}") > cfg.abort_threshold {
            diag.aborted = true;
            return Ok(RestrictedDecode { g: None, diagnostics: diag });
        }
        let frame_of = |a: &VertexSet| -> Vec<VertexSet> { enumerate_small_subsets(&t_set.union(a), d, inc).collect() };

        let mut tallies: HashMap<VertexSet, FrameTally> = HashMap::new();
        for ((s, w), &live) in pool.iter().zip(&alive) {
            let view = e.view_unchecked(s.clone());
            for a in subsets_of_size(&s.difference(t_set), i) {
                let tally = tallies.entry(a.clone()).or_default();
                tally.all += w;
                if live {
                    tally.alive += w;
                    let table: Vec<Symbol> = frame_of(&a).iter().map(|b| view.get(b)).collect();
                    *tally.votes.entry(table).or_default() += w;
                }
            }
        }

        for a in subsets_of_size(&outside_t, i) {
            let frame = frame_of(&a);
            let tally = tallies.remove(&a).unwrap_or_default();
            let chosen = tally
                .votes
                .iter()
                .max_by(|(t1, w1), (t2, w2)| {
                    // heavier first, then the lexicographically smaller table
                    let scale = w1.max(**w2);
                    if (*w1 - *w2).abs() <= REL_TIE * scale {
                        t2.cmp(t1)
                    } else {
                        w1.total_cmp(w2)
                    }
                })
                .map(|(table, w)| (table.clone(), *w));
            let rho = (tally.all > 0.0).then(|| tally.alive / tally.all);
            match chosen {
                Some((table, w)) => {
                    for (b, v) in frame.iter().zip(table) {
                        if b.difference(t_set) == a {
                            g.insert(b.clone(), v);
                        }
                    }
                    diag.frames.push(FrameStats { a, gamma: Some(w / tally.alive), rho });
                }
                None => {
                    for (idx, b) in frame.iter().enumerate().filter(|(_, b)| b.difference(t_set) == a) {
                        let v = pointwise_plurality(e, b, fallback_seed, idx as u64, q);
                        g.insert(b.clone(), v);
                    }
                    diag.fallback.push(a.clone());
                    diag.frames.push(FrameStats { a, gamma: None, rho });
                }
            }
        }

        let mut alive_weight = 0.0;
        for ((s, w), live) in pool.iter().zip(alive.iter_mut()) {
            if !*live {
                continue;
            }
            let view = e.view_unchecked(s.clone());
            *live = enumerate_small_subsets(s, d, inc)
                .filter(|b| b.difference(t_set).len() == i)
                .all(|b| view.get(&b) == g[&b]);
            if *live {
                alive_weight += w;
            }
        }
        diag.delta.push(1.0 - alive_weight / total);
    }

    let global = GlobalFunction::from_fn(n, d, q, inc, |b| g[b])?;
    Ok(RestrictedDecode { g: Some(global), diagnostics: diag })
}

fn pointwise_plurality(e: &LocalEnsemble, b: &VertexSet, seed: u64, idx: u64, q: usize) -> Symbol {
    let mut r = rng::stream(seed, "restricted-fallback", KeyedHash::new(idx).words(b.words()).finish());
    let mut votes = vec![0.0; q];
    for _ in 0..FALLBACK_SAMPLES {
        votes[e.view_unchecked(sample_containing(e, b, &mut r)).get(b) as usize] += 1.0;
    }
    pick(&votes, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{CorruptionMode, CorruptionSpec, LocalFunction};
    use crate::setcore::TestParams;

    fn random_global(n: usize, d: usize, q: usize, seed: u64) -> GlobalFunction {
        GlobalFunction::random(n, d, q, false, &mut rng::stream(seed, "g", 0)).unwrap()
    }

    #[test]
    fn global_ensembles_decode_to_themselves() {
        let f = random_global(10, 2, 3, 1);
        let e = LocalEnsemble::from_global(f.clone(), 4).unwrap();
        assert_eq!(plurality_decode(&e, EvalMode::Exact).unwrap(), f);
        assert_eq!(plurality_decode(&e, EvalMode::mc(20, 5)).unwrap(), f);
        assert_eq!(disagreement_rate(&e, &f, EvalMode::Exact).unwrap().value, 0.0);
        assert_eq!(disagreement_rate(&e, &f, EvalMode::mc(2_000, 5)).unwrap().value, 0.0);
        let biased = e.with_regime(Regime::Biased { p: 0.3 }).unwrap();
        assert_eq!(plurality_decode(&biased, EvalMode::Exact).unwrap(), f);
        assert_eq!(disagreement_rate(&biased, &f, EvalMode::Exact).unwrap().value, 0.0);
    }

    #[test]
    fn ties_go_to_the_smallest_symbol_unless_seeded() {
        // n = 4, k = 2, d = 1: the set {0,1} votes 2, every other set votes 1
        let params = TestParams::new(4, 2, 1, 1, 3).unwrap();
        let tables: Vec<LocalFunction> = enumerate_k_subsets(4, 2)
            .map(|s| {
                let symbol = if s.contains(0) && s.contains(1) { 2 } else { 1 };
                LocalFunction::from_fn(s, 1, false, |_| symbol)
            })
            .collect();
        let e = LocalEnsemble::explicit(params, false, tables).unwrap();
        // vertex 0 sees {0,1}→2, {0,2}→1, {0,3}→1
        let g = plurality_decode(&e, EvalMode::Exact).unwrap();
        assert_eq!(g.get(&VertexSet::singleton(0)), Some(1));
        assert_eq!(pick(&[0.0, 3.0, 3.0], None), 1);
        assert_eq!(pick(&[2.0, 2.0, 2.0], None), 0);
        let chosen: std::collections::BTreeSet<Symbol> =
            (0..64).map(|seed| pick(&[2.0, 2.0, 2.0], Some((seed, &VertexSet::singleton(0))))).collect();
        assert_eq!(chosen.len(), 3);
        let again = plurality_decode_with(&e, PluralityConfig { mode: EvalMode::Exact, tie_seed: Some(9) }).unwrap();
        assert_eq!(again, plurality_decode_with(&e, PluralityConfig { mode: EvalMode::Exact, tie_seed: Some(9) }).unwrap());
    }

    #[test]
    fn replace_set_votes_stay_correct_on_singletons() {
        let f = random_global(12, 1, 2, 2);
        let e = LocalEnsemble::from_global(f.clone(), 4)
            .unwrap()
            .corrupt_with_seed(CorruptionSpec::new(CorruptionMode::ReplaceSet, 0.1), 3)
            .unwrap();
        // exact vote: every singleton lies in C(11, 3) = 165 sets, about 16 of them replaced
        assert_eq!(plurality_decode(&e, EvalMode::Exact).unwrap(), f);
        let big = LocalEnsemble::from_global(random_global(40, 1, 2, 4), 8)
            .unwrap()
            .corrupt_with_seed(CorruptionSpec::new(CorruptionMode::ReplaceSet, 0.1), 5)
            .unwrap();
        assert_eq!(&plurality_decode(&big, EvalMode::mc(400, 6)).unwrap(), big.global().unwrap());
    }

    #[test]
    fn disagreement_counts_exactly_the_replaced_sets() {
        let f = random_global(12, 2, 4, 7);
        let e = LocalEnsemble::from_global(f.clone(), 4)
            .unwrap()
            .corrupt_with_seed(CorruptionSpec::new(CorruptionMode::ReplaceSet, 0.2), 8)
            .unwrap();
        let replaced = enumerate_k_subsets(12, 4)
            .filter(|s| e.materialize_local(s).unwrap() != f.restrict(s))
            .count() as f64
            / 495.0;
        let exact = disagreement_rate(&e, &f, EvalMode::Exact).unwrap();
        assert!((exact.value - replaced).abs() < 1e-12);
        assert!((exact.value - 0.2).abs() < 0.06, "{}", exact.value);
        let mc = disagreement_rate(&e, &f, EvalMode::mc(20_000, 9)).unwrap();
        assert!(mc.within_sigmas(exact.value, 3.0), "{mc:?} vs {}", exact.value);
    }

    #[test]
    fn restricted_decoder_on_a_global_ensemble() {
        let f = random_global(9, 2, 3, 10);
        let e = LocalEnsemble::from_global(f.clone(), 5).unwrap();
        let t_set = VertexSet::from_indices([0]);
        for mode in [EvalMode::Exact, EvalMode::mc(300, 11)] {
            let out = restricted_decode(&e, &t_set, &RestrictedConfig { mode, abort_threshold: 0.5 }).unwrap();
            let diag = &out.diagnostics;
            assert!(!diag.aborted);
            assert_eq!(diag.delta, vec![0.0; 4]);
            assert!(diag.frames.iter().all(|fr| fr.gamma == Some(1.0) && fr.rho == Some(1.0)));
            assert_eq!(out.g.unwrap(), f);
        }
    }

    #[test]
    fn restricted_decoder_aborts_on_scrambled_frames() {
        // every table over X_T is replaced: f_S|_T is uniform over 2^3 values for |T| = 2, d = 2
        let t_set = VertexSet::from_indices([0, 1]);
        let e = LocalEnsemble::from_global(random_global(10, 2, 2, 12), 5)
            .unwrap()
            .corrupt_with_seed(CorruptionSpec::new(CorruptionMode::ReplaceSet, 1.0).within(t_set.clone()), 13)
            .unwrap();
        let out = restricted_decode(&e, &t_set, &RestrictedConfig { mode: EvalMode::Exact, abort_threshold: 0.5 }).unwrap();
        let diag = out.diagnostics;
        let expected = 1.0 - 1.0 / 8.0;
        let sigma = (expected * (1.0 - expected) / binom_f64(8, 3)).sqrt();
        let delta0 = diag.delta_at(0).unwrap();
        assert!((delta0 - expected).abs() < 4.0 * sigma, "δ_0 = {delta0}");
        assert!(diag.aborted);
        assert!(out.g.is_none());
        assert_eq!(diag.delta.len(), 2);
    }

    #[test]
    fn restricted_decoder_delta_is_monotone() {
        for seed in 0..6 {
            let e = LocalEnsemble::from_global(random_global(10, 2, 2, seed), 5)
                .unwrap()
                .corrupt_with_seed(CorruptionSpec::new(CorruptionMode::FlipEntry, 0.02), seed + 100)
                .unwrap();
            let t_set = VertexSet::from_indices([seed as usize % 10]);
            for mode in [EvalMode::Exact, EvalMode::mc(400, seed)] {
                let out = restricted_decode(&e, &t_set, &RestrictedConfig { mode, abort_threshold: 0.5 }).unwrap();
                let delta = &out.diagnostics.delta;
                assert_eq!(delta[0], 0.0);
                assert!(delta.windows(2).all(|w| w[1] >= w[0]), "{delta:?}");
                if !out.diagnostics.aborted {
                    assert_eq!(out.g.unwrap().distance(e.global().unwrap()), 0);
                }
            }
        }
    }

    #[test]
    fn sparse_pools_fall_back_to_pointwise_plurality() {
        let f = random_global(30, 1, 2, 20);
        let e = LocalEnsemble::from_global(f.clone(), 4).unwrap();
        let out = restricted_decode(&e, &VertexSet::new(), &RestrictedConfig { mode: EvalMode::mc(3, 21), abort_threshold: 0.5 })
            .unwrap();
        assert!(!out.diagnostics.fallback.is_empty());
        assert!(out.diagnostics.frames.iter().any(|fr| fr.gamma.is_none()));
        assert_eq!(out.g.unwrap(), f);
    }

    #[test]
    fn candidate_disagreement_compares_restrictions() {
        let f = random_global(8, 1, 2, 30);
        let mut h = f.clone();
        let flipped = VertexSet::singleton(7);
        h.set(&flipped, 1 - f.get(&flipped).unwrap()).unwrap();
        let e = LocalEnsemble::from_global(f.clone(), 4).unwrap();
        let base = VertexSet::from_indices([0, 1]);
        // S ⊇ {0,1} holds 7 in C(5,1)/C(6,2) = 1/3 of cases
        let exact = candidate_disagreement(&e, &f, &h, &base, EvalMode::Exact).unwrap();
        assert!((exact.value - 1.0 / 3.0).abs() < 1e-12);
        let mc = candidate_disagreement(&e, &f, &h, &base, EvalMode::mc(9_000, 31)).unwrap();
        assert!(mc.within_sigmas(1.0 / 3.0, 3.0));
    }

    #[test]
    fn mismatched_candidates_are_rejected() {
        let e = LocalEnsemble::from_global(random_global(8, 1, 2, 40), 4).unwrap();
        let other = random_global(9, 1, 2, 41);
        assert!(disagreement_rate(&e, &other, EvalMode::Exact).is_err());
        let big = LocalEnsemble::from_global(random_global(40, 2, 2, 42), 10).unwrap();
        assert!(matches!(plurality_decode(&big, EvalMode::Exact), Err(Error::ExactInfeasible(_))));
    }
}
