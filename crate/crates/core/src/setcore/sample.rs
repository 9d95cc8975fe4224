use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::{BiasedPairParams, TestParams, VertexSet};
use crate::error::{param, Result};

/// Uniform `k`-subset of `[n]`.
pub fn sample_k_subset<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<VertexSet> {
    if k > n {
        return param(format!("cannot draw {k} elements from {n}"));
    }
    Ok(index::sample(rng, n, k).into_iter().collect())
}

/// Uniform `k`-subset of the given ground elements.
pub fn sample_k_subset_of<R: Rng + ?Sized>(ground: &[usize], k: usize, rng: &mut R) -> Result<VertexSet> {
    if k > ground.len() {
        return param(format!("cannot draw {k} elements from {}", ground.len()));
    }
    Ok(index::sample(rng, ground.len(), k).into_iter().map(|i| ground[i]).collect())
}

/// `base` together with a uniform `(k - |base|)`-subset of its complement in `[n]`:
/// a uniform `k`-set conditioned on containing `base`.
pub fn sample_superset<R: Rng + ?Sized>(n: usize, k: usize, base: &VertexSet, rng: &mut R) -> Result<VertexSet> {
    if base.len() > k || !base.fits(n) {
        return param(format!("cannot extend {base} to a {k}-subset of [{n}]"));
    }
    let rest: Vec<usize> = base.complement(n).to_vec();
    let extra = sample_k_subset_of(&rest, k - base.len(), rng)?;
    Ok(base.union(&extra))
}

/// Draw from `mu_p`: each element of `[n]` independently with probability `p`.
pub fn sample_biased<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> VertexSet {
    (0..n).filter(|_| rng.gen::<f64>() < p).collect()
}

/// `base` plus an independent `mu_p` draw on the remaining elements.
pub fn sample_biased_superset<R: Rng + ?Sized>(n: usize, p: f64, base: &VertexSet, rng: &mut R) -> VertexSet {
    let mut s = base.clone();
    for v in 0..n {
        if !base.contains(v) && rng.gen::<f64>() < p {
            s.insert(v);
        }
    }
    s
}

/// Draw `(S1, S2)` from `nu_{n,k,t}`: choose the intersection `U` uniformly,
/// then the two completions as disjoint uniform `(k - t)`-subsets of `[n] \ U`.
pub fn sample_pair_nu<R: Rng + ?Sized>(params: &TestParams, rng: &mut R) -> Result<(VertexSet, VertexSet)> {
    sample_pair_nu_containing(params, &VertexSet::new(), rng)
}

/// `nu_{n,k,t}` conditioned on `S1 ∩ S2 ⊇ fixed`. The remaining `t - |fixed|`
/// intersection points are drawn directly, not by rejection.
pub fn sample_pair_nu_containing<R: Rng + ?Sized>(
    params: &TestParams,
    fixed: &VertexSet,
    rng: &mut R,
) -> Result<(VertexSet, VertexSet)> {
    let TestParams { n, k, t, .. } = *params;
    if t > k || k > n {
        return param(format!("invalid sizes n = {n}, k = {k}, t = {t}"));
    }
    params.check_pair_fits()?;
    if fixed.len() > t || !fixed.fits(n) {
        return param(format!("fixed set {fixed} does not fit an intersection of size {t}"));
    }
    let outside: Vec<usize> = fixed.complement(n).to_vec();
    let extra = t - fixed.len();
    let free = k - t;
    let mut picks: Vec<usize> = index::sample(rng, outside.len(), extra + 2 * free).into_vec();
    picks.shuffle(rng);
    let mut s1 = fixed.clone();
    for &i in &picks[..extra] {
        s1.insert(outside[i]);
    }
    let mut s2 = s1.clone();
    for &i in &picks[extra..extra + free] {
        s1.insert(outside[i]);
    }
    for &i in &picks[extra + free..] {
        s2.insert(outside[i]);
    }
    Ok((s1, s2))
}

/// Draw `(S1, S2)` from `mu_{p,q}` on `[n]`.
pub fn sample_pair_mu<R: Rng + ?Sized>(
    n: usize,
    params: &BiasedPairParams,
    rng: &mut R,
) -> Result<(VertexSet, VertexSet)> {
    params.validate()?;
    let [one, _, both, _] = params.outcome_probabilities();
    let mut s1 = VertexSet::new();
    let mut s2 = VertexSet::new();
    for x in 0..n {
        let u: f64 = rng.gen();
        if u < one {
            s1.insert(x);
        } else if u < 2.0 * one {
            s2.insert(x);
        } else if u < 2.0 * one + both {
            s1.insert(x);
            s2.insert(x);
        }
    }
    Ok((s1, s2))
}
