//! Subsets of the ground set `[n]`: representation, enumeration, indexing
//! and the samplers for every distribution the estimators draw from.

mod enumerate;
mod index;
mod sample;
mod vertex_set;

pub use enumerate::{enumerate_k_subsets, enumerate_small_subsets, power_set, subsets_of_size};
pub use index::{binom, binom_f64, small_domain_len, small_subset_rank, SubsetIndexer};
pub use sample::{
    sample_biased, sample_biased_superset, sample_k_subset, sample_k_subset_of, sample_pair_mu, sample_pair_nu,
    sample_pair_nu_containing, sample_superset,
};
pub use vertex_set::{Members, VertexSet};

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Symbol index into the alphabet.
pub type Symbol = u32;

/// Sizes of an agreement-test instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestParams {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub d: usize,
    pub alphabet_size: usize,
}

/// Outcome of [`TestParams::validate`]: the derived ratios plus any
/// soft warnings about regimes outside the analysed range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamReport {
    /// `t / k`
    pub alpha: f64,
    /// `(k - t) / k`
    pub beta: f64,
    /// `n / k`
    pub c_ratio: f64,
    pub warnings: Vec<String>,
}

impl TestParams {
    pub fn new(n: usize, k: usize, t: usize, d: usize, alphabet_size: usize) -> Result<Self> {
        let p = TestParams { n, k, t, d, alphabet_size };
        p.validate()?;
        Ok(p)
    }

    /// Hard checks reject; the `t >= 2d`, `k - t >= d` conditions only warn.
    pub fn validate(&self) -> Result<ParamReport> {
        let TestParams { n, k, t, d, alphabet_size } = *self;
        if k > n {
            return param(format!("k = {k} exceeds n = {n}"));
        }
        if t > k {
            return param(format!("t = {t} exceeds k = {k}"));
        }
        if d == 0 {
            return param("d must be at least 1");
        }
        if alphabet_size < 2 {
            return param(format!("alphabet_size = {alphabet_size} must be at least 2"));
        }
        if alphabet_size > Symbol::MAX as usize {
            return param("alphabet_size too large");
        }
        let mut warnings = Vec::new();
        if t < 2 * d {
            warnings.push(format!("t = {t} < 2d = {}", 2 * d));
        }
        if k - t < d {
            warnings.push(format!("k - t = {} < d = {d}", k - t));
        }
        if d > k {
            warnings.push(format!("d = {d} exceeds k = {k}; local domains are truncated"));
        }
        for w in &warnings {
            log::warn!("parameters outside the analysed regime: {w}");
        }
        let kf = k.max(1) as f64;
        Ok(ParamReport {
            alpha: t as f64 / kf,
            beta: (k - t) as f64 / kf,
            c_ratio: n as f64 / kf,
            warnings,
        })
    }

    /// Whether two `k`-sets meeting in exactly `t` points fit in `[n]`.
    pub fn check_pair_fits(&self) -> Result<()> {
        if self.n + self.t < 2 * self.k {
            return param(format!("n = {} < 2k - t = {}", self.n, 2 * self.k - self.t));
        }
        Ok(())
    }
}

/// Parameters of the correlated pair distribution `mu_{p,q}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasedPairParams {
    pub p: f64,
    pub q: f64,
}

impl BiasedPairParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        let bp = BiasedPairParams { p, q };
        bp.validate()?;
        Ok(bp)
    }

    pub fn validate(&self) -> Result<()> {
        let BiasedPairParams { p, q } = *self;
        if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
            return param(format!("p = {p}, q = {q} must lie in [0, 1]"));
        }
        if p * (2.0 - q) > 1.0 + 1e-12 {
            return param(format!("p(2 - q) = {} exceeds 1", p * (2.0 - q)));
        }
        Ok(())
    }

    /// Per-element probabilities of (only first, only second, both, neither).
    pub fn outcome_probabilities(&self) -> [f64; 4] {
        let one = self.p * (1.0 - self.q);
        let both = self.p * self.q;
        [one, one, both, (1.0 - 2.0 * one - both).max(0.0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_reject_and_warn() {
        assert!(TestParams::new(5, 6, 1, 1, 2).is_err());
        assert!(TestParams::new(10, 4, 5, 1, 2).is_err());
        assert!(TestParams::new(10, 4, 2, 0, 2).is_err());
        assert!(TestParams::new(10, 4, 2, 1, 1).is_err());
        let rep = TestParams { n: 40, k: 8, t: 3, d: 2, alphabet_size: 2 }.validate().unwrap();
        assert_eq!(rep.warnings.len(), 1);
        assert!((rep.alpha - 3.0 / 8.0).abs() < 1e-12);
        assert!((rep.c_ratio - 5.0).abs() < 1e-12);
        let ok = TestParams { n: 60, k: 12, t: 6, d: 2, alphabet_size: 2 }.validate().unwrap();
        assert!(ok.warnings.is_empty());
    }

    #[test]
    fn biased_pair_constraint() {
        assert!(BiasedPairParams::new(0.5, 0.0).is_ok());
        assert!(BiasedPairParams::new(0.6, 0.1).is_err());
        let probs = BiasedPairParams::new(0.3, 0.5).unwrap().outcome_probabilities();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((probs[0] + probs[2] - 0.3).abs() < 1e-12);
    }
}
