//! Frequency estimates, Wilson intervals and least-squares fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Stream};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Default Monte Carlo sample count for estimators.
pub const DEFAULT_SAMPLES: usize = 10_000;

/// Shards are fixed in number so results do not depend on the thread pool size.
const SHARDS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Wilson 95% half-width; zero for exact values.
    pub ci_halfwidth: f64,
    /// Number of Monte Carlo draws; zero for exact values.
    pub samples: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, ci_halfwidth: 0.0, samples: 0 }
    }

    pub fn from_counts(successes: u64, samples: usize) -> Self {
        if samples == 0 {
            return Estimate { value: 0.0, ci_halfwidth: 0.0, samples: 0 };
        }
        Estimate {
            value: successes as f64 / samples as f64,
            ci_halfwidth: wilson_halfwidth(successes, samples as u64, Z95),
            samples,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.samples == 0
    }

    /// Binomial standard error of a frequency over `samples` draws at true rate `p`.
    pub fn sigma_at(&self, p: f64) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            (p * (1.0 - p) / self.samples as f64).max(0.0).sqrt()
        }
    }

    /// Whether this estimate is within `k` binomial standard deviations of `truth`.
    pub fn within_sigmas(&self, truth: f64, k: f64) -> bool {
        let tol = k * self.sigma_at(truth);
        (self.value - truth).abs() <= tol + 1e-12
    }
}

/// Exact enumeration, or Monte Carlo with a sample count and seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalMode {
    Exact,
    Mc { samples: usize, seed: u64 },
}

impl EvalMode {
    pub fn mc(samples: usize, seed: u64) -> Self {
        EvalMode::Mc { samples, seed }
    }
}

/// Half-width of the Wilson score interval for `x` successes out of `n`.
pub fn wilson_halfwidth(x: u64, n: u64, z: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let x = x as f64;
    let z2 = z * z;
    let spread = (x * (n - x) / n + z2 / 4.0).max(0.0).sqrt();
    z * spread / (n + z2)
}

/// Wilson interval bounds `(lower, upper)`.
pub fn wilson_interval(x: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let z2 = z * z;
    let centre = (x as f64 + z2 / 2.0) / (nf + z2);
    let half = wilson_halfwidth(x, n, z);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Run `samples` Bernoulli trials spread across fixed shards, each with its
/// own stream derived from `seed`, and return the number of successes.
pub fn sharded_count<F>(samples: usize, seed: u64, label: &str, trial: F) -> u64
where
    F: Fn(&mut Stream) -> bool + Sync,
{
    shard_sizes(samples)
        .into_par_iter()
        .enumerate()
        .map(|(i, size)| {
            let mut rng = rng::stream(seed, label, i as u64);
            (0..size).filter(|_| trial(&mut rng)).count() as u64
        })
        .sum()
}

/// Sharded accumulation of an arbitrary per-sample observation into a
/// mergeable accumulator.
pub fn sharded_fold<A, F, M>(samples: usize, seed: u64, label: &str, init: A, observe: F, merge: M) -> A
where
    A: Clone + Send + Sync,
    F: Fn(&mut Stream, &mut A) + Sync,
    M: Fn(A, A) -> A + Sync + Send,
{
    shard_sizes(samples)
        .into_par_iter()
        .enumerate()
        .map(|(i, size)| {
            let mut rng = rng::stream(seed, label, i as u64);
            let mut acc = init.clone();
            for _ in 0..size {
                observe(&mut rng, &mut acc);
            }
            acc
        })
        .reduce(|| init.clone(), &merge)
}

fn shard_sizes(samples: usize) -> Vec<usize> {
    let base = samples / SHARDS;
    let extra = samples % SHARDS;
    (0..SHARDS).map(|i| base + usize::from(i < extra)).collect()
}

/// Ordinary least squares `y = intercept + slope * x` with standard errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_se: f64,
    pub slope_se: f64,
    pub points: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 3 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let s2 = rss / (nf - 2.0);
    Some(LineFit {
        intercept,
        slope,
        intercept_se: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        slope_se: (s2 / sxx).sqrt(),
        points: n,
    })
}

/// Least squares through the origin `y = slope * x`; intercept fields are zero.
pub fn fit_through_origin(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / sxx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x).powi(2)).sum();
    let s2 = rss / (n as f64 - 1.0);
    Some(LineFit { intercept: 0.0, slope, intercept_se: 0.0, slope_se: (s2 / sxx).sqrt(), points: n })
}
