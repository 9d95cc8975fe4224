//! Finite hypergraphs on `[n]`, the induced/link restrictions, branching
//! factor verification and hit probabilities.

mod hit;
mod text;

pub use hit::{
    hit_exact, hit_mc, ExactLimits, HitMode, DNF_MAX_VERTICES, DNF_NODE_BUDGET, ENUMERATION_LIMIT,
    INCLUSION_EXCLUSION_MAX_EDGES,
};

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::setcore::{binom, enumerate_k_subsets, power_set, subsets_of_size, VertexSet};

/// Relative slack when comparing integer counts against real powers of `rho`.
const POWER_TOLERANCE: f64 = 1e-9;

/// `count <= bound`, tolerant to rounding in `bound`.
#[inline]
pub(crate) fn at_most(count: usize, bound: f64) -> bool {
    count as f64 <= bound * (1.0 + POWER_TOLERANCE)
}

/// `count >= bound`, tolerant to rounding in `bound`.
#[inline]
pub(crate) fn at_least(count: usize, bound: f64) -> bool {
    count as f64 >= bound * (1.0 - POWER_TOLERANCE)
}

/// `floor(x)` for a real computed as a power of a ratio, tolerant to rounding just below an integer.
#[inline]
pub(crate) fn tolerant_floor(x: f64) -> usize {
    (x * (1.0 + POWER_TOLERANCE)).floor().max(0.0) as usize
}

/// A set of distinct hyperedges over the ground set `[0, n)`.
///
/// Edges are kept sorted (lexicographically on members) and deduplicated.
/// Ordinary hypergraphs have non-empty edges; [`Hypergraph::from_family`]
/// additionally admits the empty edge, which the pruning recursion needs for
/// the 0-uniform hypergraph `{∅}`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hypergraph {
    n: usize,
    edges: Vec<VertexSet>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchingWitness {
    pub a: VertexSet,
    pub r: usize,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchingReport {
    pub rho: f64,
    pub ok: bool,
    pub witness: Option<BranchingWitness>,
}

impl Hypergraph {
    pub fn empty(n: usize) -> Self {
        Hypergraph { n, edges: Vec::new() }
    }

    /// Rejects empty edges and edges outside `[0, n)`; merges duplicates.
    pub fn new<I: IntoIterator<Item = VertexSet>>(n: usize, edges: I) -> Result<Self> {
        let edges: Vec<VertexSet> = edges.into_iter().collect();
        if let Some(e) = edges.iter().find(|e| e.is_empty()) {
            return param(format!("empty hyperedge {e}"));
        }
        Self::from_family(n, edges)
    }

    /// Like [`Hypergraph::new`] but admits the empty edge.
    pub fn from_family<I: IntoIterator<Item = VertexSet>>(n: usize, edges: I) -> Result<Self> {
        let edges: Vec<VertexSet> = edges.into_iter().collect();
        if let Some(e) = edges.iter().find(|e| !e.fits(n)) {
            return param(format!("hyperedge {e} not contained in [0, {n})"));
        }
        Ok(Self::from_sorted_unchecked(n, edges))
    }

    fn from_sorted_unchecked(n: usize, mut edges: Vec<VertexSet>) -> Self {
        edges.sort();
        edges.dedup();
        Hypergraph { n, edges }
    }

    /// `m` distinct `d`-sets chosen uniformly (all of them when `m ≥ C(n, d)`).
    pub fn random_uniform<R: Rng + ?Sized>(n: usize, d: usize, m: usize, rng: &mut R) -> Result<Self> {
        if d == 0 || d > n {
            return param(format!("edge size {d} must lie in 1..={n}"));
        }
        if binom(n, d) > 10_000_000 {
            return param(format!("C({n}, {d}) is too large to sample from"));
        }
        let all: Vec<VertexSet> = enumerate_k_subsets(n, d).collect();
        let edges = all.choose_multiple(rng, m.min(all.len())).cloned().collect();
        Ok(Self::from_sorted_unchecked(n, edges))
    }

    pub fn from_index_lists(n: usize, lists: &[&[usize]]) -> Result<Self> {
        let edges = lists
            .iter()
            .map(|l| VertexSet::try_from_indices(l, n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[VertexSet] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains_edge(&self, e: &VertexSet) -> bool {
        self.edges.binary_search(e).is_ok()
    }

    pub fn has_empty_edge(&self) -> bool {
        self.edges.first().is_some_and(|e| e.is_empty())
    }

    /// Maximum edge size; `None` for the empty hypergraph.
    pub fn uniformity(&self) -> Option<usize> {
        self.edges.iter().map(|e| e.len()).max()
    }

    /// `Some(d)` when every edge has exactly `d` elements.
    pub fn uniform_size(&self) -> Option<usize> {
        let d = self.edges.first()?.len();
        self.edges.iter().all(|e| e.len() == d).then_some(d)
    }

    pub fn is_uniform(&self, d: usize) -> bool {
        self.edges.iter().all(|e| e.len() == d)
    }

    /// Union of all edges.
    pub fn vertices(&self) -> VertexSet {
        self.edges.iter().fold(VertexSet::new(), |acc, e| acc.union(e))
    }

    pub fn is_subhypergraph_of(&self, other: &Hypergraph) -> bool {
        self.edges.iter().all(|e| other.contains_edge(e))
    }

    /// Induced subhypergraph: the edges contained in `s`.
    pub fn restrict(&self, s: &VertexSet) -> Hypergraph {
        Hypergraph { n: self.n, edges: self.edges.iter().filter(|e| e.is_subset(s)).cloned().collect() }
    }

    /// Remove the vertices of `a` from every edge, dropping the empty edge and merging duplicates.
    pub fn link_delete(&self, a: &VertexSet) -> Hypergraph {
        let edges = self.edges.iter().map(|e| e.difference(a)).filter(|e| !e.is_empty()).collect();
        Self::from_sorted_unchecked(self.n, edges)
    }

    pub fn without_edge(&self, e: &VertexSet) -> Hypergraph {
        Hypergraph { n: self.n, edges: self.edges.iter().filter(|x| *x != e).cloned().collect() }
    }

    pub fn union(&self, other: &Hypergraph) -> Hypergraph {
        let mut edges = self.edges.clone();
        edges.extend(other.edges.iter().cloned());
        Self::from_sorted_unchecked(self.n.max(other.n), edges)
    }

    /// Edges not present in `other`.
    pub fn difference(&self, other: &Hypergraph) -> Hypergraph {
        Hypergraph { n: self.n, edges: self.edges.iter().filter(|e| !other.contains_edge(e)).cloned().collect() }
    }

    /// Edges containing `a`, in sorted order.
    pub fn extensions<'a>(&'a self, a: &'a VertexSet) -> impl Iterator<Item = &'a VertexSet> + 'a {
        self.edges.iter().filter(move |e| a.is_subset(e))
    }

    /// For every `size`-subset `A` of some edge, the number of edges containing `A`.
    pub fn extension_counts(&self, size: usize) -> HashMap<VertexSet, usize> {
        let mut counts = HashMap::new();
        for e in &self.edges {
            if e.len() < size {
                continue;
            }
            for a in subsets_of_size(e, size) {
                *counts.entry(a).or_insert(0) += 1;
            }
        }
        counts
    }

    /// For every subset `A` of some edge and every `r`, the number of edges `e ⊇ A` with `|e| = |A| + r`.
    fn containment_profile(&self) -> HashMap<(VertexSet, usize), usize> {
        let mut counts = HashMap::new();
        for e in &self.edges {
            for a in power_set(e) {
                let r = e.len() - a.len();
                *counts.entry((a, r)).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Verify branching factor `rho`: for all `A` and `r >= 0`, at most
    /// `rho^r` edges of size `|A| + r` contain `A`.
    ///
    /// Only subsets of existing edges (including `∅`) can violate the bound
    /// for `r >= 1`, and the `r = 0` count is at most one, so those are the
    /// only candidates examined. The reported witness is the violation that is
    /// smallest by `(|A|, A, r)`.
    pub fn check_branching(&self, rho: f64) -> Result<BranchingReport> {
        if rho.is_nan() || rho <= 0.0 || rho.is_infinite() {
            return param(format!("branching factor must be positive and finite, got {rho}"));
        }
        let mut violations: Vec<BranchingWitness> = self
            .containment_profile()
            .into_iter()
            .filter(|((_, r), count)| *r >= 1 && !at_most(*count, rho.powi(*r as i32)))
            .map(|((a, r), count)| BranchingWitness { a, r, count })
            .collect();
        violations.sort_by(|x, y| (x.a.len(), &x.a, x.r).cmp(&(y.a.len(), &y.a, y.r)));
        let witness = violations.into_iter().next();
        Ok(BranchingReport { rho, ok: witness.is_none(), witness })
    }

    /// Smallest `rho` the hypergraph satisfies: `max count^(1/r)` over the
    /// containment profile, and 1 when there is nothing to bound.
    pub fn min_branching_factor(&self) -> f64 {
        self.containment_profile()
            .into_iter()
            .filter(|((_, r), _)| *r >= 1)
            .map(|((_, r), count)| (count as f64).powf(1.0 / r as f64))
            .fold(1.0, f64::max)
    }
}

impl fmt::Debug for Hypergraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hypergraph(n={}, ", self.n)?;
        f.debug_set().entries(self.edges.iter()).finish()?;
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setcore::enumerate_k_subsets;
    use proptest::prelude::*;

    fn hg(n: usize, lists: &[&[usize]]) -> Hypergraph {
        Hypergraph::from_index_lists(n, lists).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(Hypergraph::from_index_lists(3, &[&[0, 3]]).is_err());
        assert!(Hypergraph::new(3, [VertexSet::new()]).is_err());
        assert!(Hypergraph::from_family(3, [VertexSet::new()]).unwrap().has_empty_edge());
        let h = hg(5, &[&[2, 3], &[0, 1], &[3, 2]]);
        assert_eq!(h.len(), 2);
        assert_eq!(h.edges()[0].to_vec(), vec![0, 1]);
        assert_eq!(h.uniform_size(), Some(2));
        assert_eq!(h.vertices().to_vec(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn restrict_examples() {
        let s = VertexSet::from_indices([1, 2, 3]);
        assert!(Hypergraph::empty(5).restrict(&s).is_empty());
        assert_eq!(hg(5, &[&[1, 2]]).restrict(&s), hg(5, &[&[1, 2]]));
        assert_eq!(hg(5, &[&[1, 2], &[2, 4]]).restrict(&s), hg(5, &[&[1, 2]]));
    }

    #[test]
    fn link_delete_examples() {
        let two = VertexSet::singleton(2);
        assert_eq!(hg(5, &[&[1, 2], &[2, 3]]).link_delete(&two), hg(5, &[&[1], &[3]]));
        assert!(hg(5, &[&[2]]).link_delete(&two).is_empty());
        let three = VertexSet::singleton(3);
        assert_eq!(hg(5, &[&[1, 2], &[1, 3], &[2, 3]]).link_delete(&three), hg(5, &[&[1, 2], &[1], &[2]]));
    }

    #[test]
    fn branching_examples() {
        let single = hg(6, &[&[0, 3, 5]]);
        assert!(single.check_branching(1.0).unwrap().ok);

        let k4: Vec<VertexSet> = enumerate_k_subsets(4, 2).collect();
        let k4 = Hypergraph::new(4, k4).unwrap();
        let rep = k4.check_branching(2.9).unwrap();
        assert!(!rep.ok);
        let w = rep.witness.unwrap();
        assert_eq!((w.a.len(), w.r, w.count), (1, 1, 3));
        assert_eq!(w.a, VertexSet::singleton(0));
        assert!(k4.check_branching(3.0).unwrap().ok);
        assert!((k4.min_branching_factor() - 3.0).abs() < 1e-12);

        let cherry = hg(4, &[&[1, 2], &[1, 3]]);
        assert!(cherry.check_branching(2.0).unwrap().ok);
        assert!(!cherry.check_branching(1.9).unwrap().ok);
        assert!(cherry.check_branching(0.0).is_err());
    }

    /// Exhaustive definition over every `A ⊆ [n]`, used as the oracle.
    fn branching_by_definition(h: &Hypergraph, rho: f64) -> bool {
        let full = VertexSet::full(h.n());
        power_set(&full).all(|a| {
            (0..=h.n()).all(|r| {
                let count = h.edges().iter().filter(|e| a.is_subset(e) && e.len() == a.len() + r).count();
                at_most(count, rho.powi(r as i32))
            })
        })
    }

    fn arb_hypergraph(n: usize, max_size: usize, max_edges: usize) -> impl Strategy<Value = Hypergraph> {
        proptest::collection::vec(proptest::collection::btree_set(0..n, 1..=max_size), 0..max_edges)
            .prop_map(move |es| Hypergraph::new(n, es.into_iter().map(|e| e.into_iter().collect())).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn branching_check_matches_definition(h in arb_hypergraph(7, 3, 12), rho in 1.0f64..4.0) {
            prop_assert_eq!(h.check_branching(rho).unwrap().ok, branching_by_definition(&h, rho));
        }

        #[test]
        fn branching_is_monotone_in_rho(h in arb_hypergraph(9, 3, 25), rho in 1.0f64..5.0, extra in 0.0f64..3.0) {
            if h.check_branching(rho).unwrap().ok {
                prop_assert!(h.check_branching(rho + extra).unwrap().ok);
            }
            prop_assert!(h.check_branching(h.min_branching_factor()).unwrap().ok);
        }

        #[test]
        fn link_delete_relaxes_branching(
            h in arb_hypergraph(10, 3, 30),
            a in proptest::collection::btree_set(0usize..10, 0..3),
        ) {
            let rho = h.min_branching_factor();
            let a: VertexSet = a.into_iter().collect();
            let linked = h.link_delete(&a);
            let relaxed = 2f64.powi(a.len() as i32) * rho;
            prop_assert!(linked.check_branching(relaxed).unwrap().ok);
        }

        #[test]
        fn restrict_is_a_subhypergraph(h in arb_hypergraph(10, 3, 30), s in proptest::collection::btree_set(0usize..10, 0..10)) {
            let s: VertexSet = s.into_iter().collect();
            let r = h.restrict(&s);
            prop_assert!(r.is_subhypergraph_of(&h));
            prop_assert!(r.edges().iter().all(|e| e.is_subset(&s)));
            prop_assert_eq!(h.restrict(&VertexSet::full(10)), h.clone());
            prop_assert_eq!(h.link_delete(&VertexSet::new()), h);
        }
    }
}
