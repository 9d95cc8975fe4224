//! Corrupt-agree-decode trials and sweeps over corruption rate and `n`.

use std::collections::BTreeMap;
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agreement::{agreement_estimate, agreement_exact, AgreementReport, PairDistribution};
use crate::decode::{disagreement_rate, plurality_decode};
use crate::ensemble::{CorruptionSpec, GlobalFunction, LocalEnsemble, Regime};
use crate::error::{param, Result};
use crate::rng::{derive_seed, stream};
use crate::setcore::TestParams;
use crate::stats::{EvalMode, Estimate};

/// Column order of [`SweepRow`] in CSV output.
pub const CSV_HEADER: [&str; 10] =
    ["rate", "n", "k", "t", "d", "epsilon_hat", "epsilon_ci", "decode_disagreement", "disagreement_ci", "seed"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleCounts {
    /// Pairs drawn by the agreement estimator.
    pub agree: usize,
    /// Sets drawn per domain point by the plurality decoder.
    pub decode_per_point: usize,
    /// Sets drawn when measuring disagreement with a global candidate.
    pub disagreement: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        SampleCounts { agree: 10_000, decode_per_point: 200, disagreement: 10_000 }
    }
}

/// Everything one trial needs apart from its seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub params: TestParams,
    pub include_empty: bool,
    pub regime: Regime,
    pub distribution: PairDistribution,
    pub corruption: CorruptionSpec,
    pub samples: SampleCounts,
    /// Enumerate instead of sampling wherever the instance allows it.
    pub exact: bool,
}

impl TrialSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.corruption.validate()?;
        match (self.regime, self.distribution) {
            (Regime::Uniform, PairDistribution::Nu { .. }) | (Regime::Biased { .. }, PairDistribution::MuPq { .. }) => Ok(()),
            _ => param("nu pairs go with the uniform regime and mu_{p,q} pairs with the biased one"),
        }
    }

    /// The same spec at a different `n`, keeping `k/n` and `t/k`.
    pub fn scaled_to(&self, n: usize) -> Result<TrialSpec> {
        let p = self.params;
        let k = ((n as f64) * p.k as f64 / p.n as f64).round() as usize;
        let t = ((k as f64) * p.t as f64 / p.k as f64).round() as usize;
        let params = TestParams::new(n, k, t, p.d, p.alphabet_size)?;
        let distribution = match self.distribution {
            PairDistribution::Nu { .. } => PairDistribution::Nu { t },
            other => other,
        };
        Ok(TrialSpec { params, distribution, ..self.clone() })
    }
}

/// Measurements from one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub params: TestParams,
    pub rate: f64,
    pub agreement: AgreementReport,
    /// Disagreement of the plurality decode.
    pub decode_disagreement: Estimate,
    /// Disagreement of the uncorrupted global function, on the same draws.
    pub global_disagreement: Estimate,
    /// Domain points where the decode differs from the planted global function.
    pub decode_distance: usize,
}

impl TrialOutcome {
    pub fn row(&self) -> SweepRow {
        SweepRow {
            rate: self.rate,
            n: self.params.n,
            k: self.params.k,
            t: self.params.t,
            d: self.params.d,
            epsilon_hat: self.agreement.epsilon_hat,
            epsilon_ci: self.agreement.ci_halfwidth,
            decode_disagreement: self.decode_disagreement.value,
            disagreement_ci: self.decode_disagreement.ci_halfwidth,
            seed: self.seed,
        }
    }
}

/// One CSV line; field order matches [`CSV_HEADER`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rate: f64,
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub d: usize,
    pub epsilon_hat: f64,
    pub epsilon_ci: f64,
    pub decode_disagreement: f64,
    pub disagreement_ci: f64,
    pub seed: u64,
}

/// The planted global function and its corrupted ensemble for a trial seed.
pub fn build_instance(spec: &TrialSpec, seed: u64) -> Result<(GlobalFunction, LocalEnsemble)> {
    spec.validate()?;
    let p = spec.params;
    let global = GlobalFunction::random(p.n, p.d, p.alphabet_size, spec.include_empty, &mut stream(seed, "global", 0))?;
    let ensemble = LocalEnsemble::from_global(global.clone(), p.k)?
        .with_t(p.t)?
        .with_regime(spec.regime)?
        .corrupt_with_seed(spec.corruption.clone(), derive_seed(seed, "corrupt", 0))?;
    Ok((global, ensemble))
}

/// Build, measure agreement, decode by plurality, measure disagreement.
pub fn run_trial(spec: &TrialSpec, seed: u64) -> Result<TrialOutcome> {
    let (global, e) = build_instance(spec, seed)?;
    let agreement = match spec.distribution {
        PairDistribution::Nu { t } if spec.exact => agreement_exact(&e, t)?,
        dist => agreement_estimate(&e, dist, spec.samples.agree, &mut stream(seed, "agree", 0))?,
    };
    let decode_mode = if spec.exact { EvalMode::Exact } else { EvalMode::mc(spec.samples.decode_per_point, derive_seed(seed, "decode", 0)) };
    let decoded = plurality_decode(&e, decode_mode)?;
    let measure = if spec.exact { EvalMode::Exact } else { EvalMode::mc(spec.samples.disagreement, derive_seed(seed, "disagreement", 0)) };
    Ok(TrialOutcome {
        seed,
        params: spec.params,
        rate: spec.corruption.rate,
        agreement,
        decode_disagreement: disagreement_rate(&e, &decoded, measure)?,
        global_disagreement: disagreement_rate(&e, &global, measure)?,
        decode_distance: decoded.distance(&global),
    })
}

/// Grid of a sweep: every rate at every `n`, `trials` times each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub rates: Vec<f64>,
    /// Values of `n`; empty means the base spec's `n` only.
    pub ns: Vec<usize>,
    pub trials: usize,
}

/// The trial specs and seeds of a sweep, in output order.
pub fn sweep_jobs(base: &TrialSpec, plan: &SweepPlan, master_seed: u64) -> Result<Vec<(TrialSpec, u64)>> {
    if plan.rates.is_empty() || plan.trials == 0 {
        return param("a sweep needs at least one rate and one trial");
    }
    let ns = if plan.ns.is_empty() { vec![base.params.n] } else { plan.ns.clone() };
    let mut jobs = Vec::new();
    for &rate in &plan.rates {
        for &n in &ns {
            let mut spec = if n == base.params.n { base.clone() } else { base.scaled_to(n)? };
            spec.corruption.rate = rate;
            spec.validate()?;
            for _ in 0..plan.trials {
                let seed = derive_seed(master_seed, "trial", jobs.len() as u64);
                jobs.push((spec.clone(), seed));
            }
        }
    }
    Ok(jobs)
}

/// Runs the trials in parallel and hands outcomes to `sink` in job order,
/// each as soon as it and all earlier ones are done.
pub fn run_sweep<F>(base: &TrialSpec, plan: &SweepPlan, master_seed: u64, mut sink: F) -> Result<Vec<TrialOutcome>>
where
    F: FnMut(&TrialOutcome) -> Result<()>,
{
    let jobs = sweep_jobs(base, plan, master_seed)?;
    let (tx, rx) = mpsc::channel::<(usize, Result<TrialOutcome>)>();
    let mut outcomes = Vec::with_capacity(jobs.len());
    let mut first_error = None;
    std::thread::scope(|scope| {
        scope.spawn(|| {
            jobs.par_iter().enumerate().for_each_with(tx, |tx, (i, (spec, seed))| {
                // the receiver only hangs up after an error, when results no longer matter
                let _ = tx.send((i, run_trial(spec, *seed)));
            });
        });
        let mut pending = BTreeMap::new();
        for (i, result) in rx {
            pending.insert(i, result);
            while let Some(result) = pending.remove(&outcomes.len()) {
                match result.and_then(|o| sink(&o).map(|_| o)) {
                    Ok(o) => outcomes.push(o),
                    Err(e) => {
                        first_error = Some(e);
                        return;
                    }
                }
            }
        }
    });
    match first_error {
        Some(e) => Err(e),
        None => Ok(outcomes),
    }
}
