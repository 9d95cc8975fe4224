//! The agreement check and its estimators, plus the conditional
//! disagreement quantities `ε_T(∅)`, `ε_T(i)` and `ε_{T,A}`.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::ensemble::{LocalEnsemble, LocalFunction, LocalView, Regime};
use crate::error::{param, Error, Result};
use crate::rng::fork_seed;
use crate::setcore::{
    binom, enumerate_k_subsets, enumerate_small_subsets, sample_k_subset_of, sample_pair_mu, sample_pair_nu,
    sample_pair_nu_containing, subsets_of_size, BiasedPairParams, TestParams, VertexSet,
};
use crate::stats::{sharded_count, sharded_fold, Estimate};

/// Largest number of weighted pairs the exact estimators will enumerate.
pub const EXACT_PAIR_LIMIT: u128 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairDistribution {
    /// `nu_{n,k,t}`: `k`-subsets meeting in exactly `t` points.
    Nu { t: usize },
    /// `mu_{p,q}`: correlated `mu_p` pair.
    MuPq { p: f64, q: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    Exact,
    Mc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// Fraction of pairs failing the agreement check.
    pub epsilon_hat: f64,
    pub ci_halfwidth: f64,
    pub samples: usize,
    pub mode: EstimateMode,
    /// Entry `j` is the fraction of pairs whose tables differ at exactly
    /// `j` domain points of `S1 ∩ S2`.
    pub per_size_breakdown: Option<Vec<f64>>,
}

/// Domain points of `S1 ∩ S2` where the two tables differ.
fn disagreements(f1: &LocalView<'_>, f2: &LocalView<'_>, d: usize, include_empty: bool) -> usize {
    let common = f1.set().intersection(f2.set());
    enumerate_small_subsets(&common, d, include_empty).filter(|a| f1.get(a) != f2.get(a)).count()
}

/// `f1(A) = f2(A)` for every domain point `A ⊆ S1 ∩ S2` of size at most `d`.
pub fn agree_check(f1: &LocalFunction, f2: &LocalFunction, d: usize) -> bool {
    let common = f1.set().intersection(f2.set());
    let include_empty = f1.include_empty() && f2.include_empty();
    enumerate_small_subsets(&common, d, include_empty).all(|a| f1.get(&a) == f2.get(&a))
}

fn check_distribution(e: &LocalEnsemble, dist: &PairDistribution) -> Result<()> {
    match *dist {
        PairDistribution::Nu { t } => {
            if e.regime() != Regime::Uniform {
                return param("nu pairs need an ensemble over k-subsets");
            }
            let params = TestParams { t, ..*e.params() };
            params.validate()?;
            params.check_pair_fits()
        }
        PairDistribution::MuPq { p, q } => {
            if !matches!(e.regime(), Regime::Biased { .. }) {
                return param("mu_{p,q} pairs need an ensemble in the biased regime");
            }
            BiasedPairParams::new(p, q).map(|_| ())
        }
    }
}

#[derive(Clone)]
struct Tally {
    failures: u64,
    histogram: Vec<u64>,
}

impl Tally {
    fn new() -> Self {
        Tally { failures: 0, histogram: Vec::new() }
    }

    fn record(&mut self, j: usize) {
        if j > 0 {
            self.failures += 1;
        }
        if self.histogram.len() <= j {
            self.histogram.resize(j + 1, 0);
        }
        self.histogram[j] += 1;
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.failures += other.failures;
        if self.histogram.len() < other.histogram.len() {
            self.histogram.resize(other.histogram.len(), 0);
        }
        for (a, b) in self.histogram.iter_mut().zip(other.histogram) {
            *a += b;
        }
        self
    }
}

/// Monte Carlo estimate of `1 - agree_D(f)` with a Wilson interval.
pub fn agreement_estimate<R: RngCore + ?Sized>(
    e: &LocalEnsemble,
    dist: PairDistribution,
    samples: usize,
    rng: &mut R,
) -> Result<AgreementReport> {
    check_distribution(e, &dist)?;
    if samples == 0 {
        return param("need at least one sample");
    }
    let seed = fork_seed(rng);
    let params = *e.params();
    let (d, include_empty) = (params.d, e.include_empty());
    let tally = sharded_fold(
        samples,
        seed,
        "agree",
        Tally::new(),
        |r, acc| {
            let (s1, s2) = match dist {
                PairDistribution::Nu { t } => sample_pair_nu(&TestParams { t, ..params }, r),
                PairDistribution::MuPq { p, q } => sample_pair_mu(params.n, &BiasedPairParams { p, q }, r),
            }
            .expect("validated distribution");
            let j = disagreements(&e.view_unchecked(s1), &e.view_unchecked(s2), d, include_empty);
            acc.record(j);
        },
        Tally::merge,
    );
    let est = Estimate::from_counts(tally.failures, samples);
    Ok(AgreementReport {
        epsilon_hat: est.value,
        ci_halfwidth: est.ci_halfwidth,
        samples,
        mode: EstimateMode::Mc,
        per_size_breakdown: Some(tally.histogram.iter().map(|&c| c as f64 / samples as f64).collect()),
    })
}

/// Exact `1 - agree_nu(f)` by enumerating every `nu_{n,k,t}` outcome: the
/// intersection `U`, then the ordered pair of disjoint completions.
pub fn agreement_exact(e: &LocalEnsemble, t: usize) -> Result<AgreementReport> {
    check_distribution(e, &PairDistribution::Nu { t })?;
    let TestParams { n, k, d, .. } = *e.params();
    let outcomes = binom(n, t).saturating_mul(binom(n - t, k - t)).saturating_mul(binom(n - k, k - t));
    if outcomes > EXACT_PAIR_LIMIT {
        return Err(Error::ExactInfeasible(format!("{outcomes} pair outcomes exceed {EXACT_PAIR_LIMIT}")));
    }
    let mut tally = Tally::new();
    let mut total = 0u64;
    for u in enumerate_k_subsets(n, t) {
        for_each_completion(n, k, &u, |s1, s2| {
            tally.record(disagreements(&e.view_unchecked(s1), &e.view_unchecked(s2), d, e.include_empty()));
            total += 1;
        });
    }
    Ok(AgreementReport {
        epsilon_hat: tally.failures as f64 / total as f64,
        ci_halfwidth: 0.0,
        samples: 0,
        mode: EstimateMode::Exact,
        per_size_breakdown: Some(tally.histogram.iter().map(|&c| c as f64 / total as f64).collect()),
    })
}

/// Every ordered pair `(S1, S2)` of `k`-sets with `S1 ∩ S2 = u`, each once.
fn for_each_completion(n: usize, k: usize, u: &VertexSet, mut visit: impl FnMut(VertexSet, VertexSet)) {
    let rest = u.complement(n);
    let free = k - u.len();
    for w1 in subsets_of_size(&rest, free) {
        let left = rest.difference(&w1);
        for w2 in subsets_of_size(&left, free) {
            visit(u.union(&w1), u.union(&w2));
        }
    }
}

/// Whether a pair with `S1 ∩ S2 ⊇ T ∪ A` witnesses the conditional event.
///
/// With `a = None` the event is disagreement on the frame `T^(0)`, the
/// points inside `T`. With `a = Some(A)`, `i = |A|`, it is agreement on
/// `T^(i-1)` (points with at most `i - 1` elements outside `T`) together with
/// disagreement on `T^(A)` (points inside `T ∪ A`).
fn conditional_event(
    f1: &LocalView<'_>,
    f2: &LocalView<'_>,
    t_set: &VertexSet,
    a: Option<&VertexSet>,
    d: usize,
    include_empty: bool,
) -> bool {
    match a {
        None => enumerate_small_subsets(t_set, d, include_empty).any(|b| f1.get(&b) != f2.get(&b)),
        Some(a) => {
            let common = f1.set().intersection(f2.set());
            let i = a.len();
            let agree_prev = i == 0
                || enumerate_small_subsets(&common, d, include_empty)
                    .filter(|b| b.difference(t_set).len() < i)
                    .all(|b| f1.get(&b) == f2.get(&b));
            agree_prev
                && enumerate_small_subsets(&t_set.union(a), d, include_empty).any(|b| f1.get(&b) != f2.get(&b))
        }
    }
}

fn check_conditional(e: &LocalEnsemble, t: usize, t_set: &VertexSet, a: Option<&VertexSet>) -> Result<VertexSet> {
    check_distribution(e, &PairDistribution::Nu { t })?;
    let params = e.params();
    if !t_set.fits(params.n) {
        return param(format!("T = {t_set} is not a subset of [{}]", params.n));
    }
    let fixed = match a {
        None => t_set.clone(),
        Some(a) => {
            if !a.is_disjoint(t_set) || a.len() > params.d || !a.fits(params.n) {
                return param(format!("A = {a} must be disjoint from T with |A| <= d"));
            }
            t_set.union(a)
        }
    };
    if fixed.len() > t {
        return param(format!("|T ∪ A| = {} exceeds t = {t}", fixed.len()));
    }
    Ok(fixed)
}

/// Monte Carlo estimate of `ε_T(∅)` (`a = None`) or `ε_{T,A}` under `nu_{n,k,t}`
/// conditioned on `S1 ∩ S2 ⊇ T ∪ A`. The conditional pair is drawn directly.
pub fn conditional_disagreement<R: RngCore + ?Sized>(
    e: &LocalEnsemble,
    t: usize,
    t_set: &VertexSet,
    a: Option<&VertexSet>,
    samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let fixed = check_conditional(e, t, t_set, a)?;
    let params = TestParams { t, ..*e.params() };
    let seed = fork_seed(rng);
    let hits = sharded_count(samples, seed, "conditional", |r| {
        let (s1, s2) = sample_pair_nu_containing(&params, &fixed, r).expect("validated sizes");
        conditional_event(&e.view_unchecked(s1), &e.view_unchecked(s2), t_set, a, params.d, e.include_empty())
    });
    Ok(Estimate::from_counts(hits, samples))
}

/// Exact `ε_T(∅)` or `ε_{T,A}` by enumerating the conditional support.
pub fn conditional_disagreement_exact(e: &LocalEnsemble, t: usize, t_set: &VertexSet, a: Option<&VertexSet>) -> Result<f64> {
    let fixed = check_conditional(e, t, t_set, a)?;
    let TestParams { n, k, d, .. } = *e.params();
    let outside = fixed.complement(n);
    let extra = t - fixed.len();
    let outcomes = binom(outside.len(), extra)
        .saturating_mul(binom(n - t, k - t))
        .saturating_mul(binom(n - k, k - t));
    if outcomes > EXACT_PAIR_LIMIT {
        return Err(Error::ExactInfeasible(format!("{outcomes} conditional outcomes exceed {EXACT_PAIR_LIMIT}")));
    }
    let (mut hits, mut total) = (0u64, 0u64);
    for more in subsets_of_size(&outside, extra) {
        let u = fixed.union(&more);
        for_each_completion(n, k, &u, |s1, s2| {
            total += 1;
            if conditional_event(&e.view_unchecked(s1), &e.view_unchecked(s2), t_set, a, d, e.include_empty()) {
                hits += 1;
            }
        });
    }
    Ok(hits as f64 / total as f64)
}

/// `E_T[ε_T(∅)]` (`a_size = None`) or `E_{T,A}[ε_{T,A}]` over uniform `T`
/// of size `t_size` and uniform `A` of size `a_size` disjoint from `T`.
pub fn mean_conditional_disagreement_exact(e: &LocalEnsemble, t: usize, t_size: usize, a_size: Option<usize>) -> Result<f64> {
    let n = e.params().n;
    let (mut sum, mut count) = (0.0, 0usize);
    for t_set in enumerate_k_subsets(n, t_size) {
        match a_size {
            None => {
                sum += conditional_disagreement_exact(e, t, &t_set, None)?;
                count += 1;
            }
            Some(size) => {
                for a in subsets_of_size(&t_set.complement(n), size) {
                    sum += conditional_disagreement_exact(e, t, &t_set, Some(&a))?;
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        return param("no (T, A) configurations of the requested sizes");
    }
    Ok(sum / count as f64)
}

/// Monte Carlo counterpart of [`mean_conditional_disagreement_exact`]:
/// each draw picks `T`, `A` and a conditioned pair afresh.
pub fn mean_conditional_disagreement<R: RngCore + ?Sized>(
    e: &LocalEnsemble,
    t: usize,
    t_size: usize,
    a_size: Option<usize>,
    samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let params = TestParams { t, ..*e.params() };
    let n = params.n;
    if t_size + a_size.unwrap_or(0) > t {
        return param("|T| + |A| exceeds t");
    }
    // validates the distribution and the sizes on a representative T, A
    let probe_t: VertexSet = (0..t_size).collect();
    let probe_a: Option<VertexSet> = a_size.map(|s| (t_size..t_size + s).collect());
    check_conditional(e, t, &probe_t, probe_a.as_ref())?;
    let ground: Vec<usize> = (0..n).collect();
    let seed = fork_seed(rng);
    let hits = sharded_count(samples, seed, "mean-conditional", |r| {
        let t_set = sample_k_subset_of(&ground, t_size, r).expect("t_size <= n");
        let a = a_size.map(|s| sample_k_subset_of(&t_set.complement(n).to_vec(), s, r).expect("fits"));
        let fixed = a.as_ref().map_or_else(|| t_set.clone(), |a| t_set.union(a));
        let (s1, s2) = sample_pair_nu_containing(&params, &fixed, r).expect("validated sizes");
        conditional_event(&e.view_unchecked(s1), &e.view_unchecked(s2), &t_set, a.as_ref(), params.d, e.include_empty())
    });
    Ok(Estimate::from_counts(hits, samples))
}
