//! Experiment configuration: one JSON or TOML file, overridden by flags.

use std::path::{Path, PathBuf};

use agreement_core::agreement::PairDistribution;
use agreement_core::ensemble::{CorruptionMode, CorruptionSpec, Regime};
use agreement_core::experiment::{SampleCounts, SweepPlan, TrialSpec};
use agreement_core::pruning::{PruneConfig, SelectionRule};
use agreement_core::setcore::TestParams;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub params: TestParams,
    pub include_empty: bool,
    pub regime: Regime,
    /// Defaults to `nu` at `params.t` (uniform regime) or `mu_{p,1/2}` (biased).
    pub distribution: Option<PairDistribution>,
    pub corruption: CorruptionSpec,
    pub sweep: SweepSection,
    pub samples: SampleSection,
    pub prune: PruneSection,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            params: TestParams { n: 30, k: 6, t: 3, d: 1, alphabet_size: 2 },
            include_empty: false,
            regime: Regime::Uniform,
            distribution: None,
            corruption: CorruptionSpec::new(CorruptionMode::ReplaceSet, 0.0),
            sweep: SweepSection::default(),
            samples: SampleSection::default(),
            prune: PruneSection::default(),
            seed: 0,
            output_path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub rates: Vec<f64>,
    /// Extra values of `n`, scaled at fixed `k/n` and `t/k`; empty means `params.n`.
    pub ns: Vec<usize>,
    pub trials: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { rates: vec![0.0, 0.02, 0.05, 0.1], ns: Vec::new(), trials: 5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSection {
    pub agree: usize,
    pub decode_per_point: usize,
    pub disagreement: usize,
    pub hit: usize,
    pub unique_hit: usize,
    /// Pool of sampled `S ⊇ T` for the restricted decoder.
    pub pool: usize,
}

impl Default for SampleSection {
    fn default() -> Self {
        let counts = SampleCounts::default();
        SampleSection {
            agree: counts.agree,
            decode_per_point: counts.decode_per_point,
            disagreement: counts.disagreement,
            hit: 10_000,
            unique_hit: 10_000,
            pool: 5_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PruneSection {
    pub c: f64,
    pub p: f64,
    pub epsilon: f64,
    pub selection_rule: SelectionRule,
    /// Set for the uniform `k`-subset setting; `p` is then `k / n`.
    pub k: Option<usize>,
}

impl Default for PruneSection {
    fn default() -> Self {
        PruneSection { c: 0.5, p: 0.1, epsilon: 0.25, selection_rule: SelectionRule::MaxHit, k: None }
    }
}

impl PruneSection {
    pub fn config(&self) -> agreement_core::Result<PruneConfig> {
        let mut cfg = PruneConfig::new(self.c, self.p, self.epsilon)?;
        cfg.selection_rule = self.selection_rule;
        Ok(cfg)
    }
}

/// Flag values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads `.toml` files as TOML and everything else as JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let cfg = if is_toml {
            toml::from_str(&text).with_context(|| format!("parsing TOML config {}", path.display()))?
        } else {
            serde_json::from_str(&text).with_context(|| format!("parsing JSON config {}", path.display()))?
        };
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(s) = o.samples {
            self.samples.agree = s;
            self.samples.disagreement = s;
            self.samples.hit = s;
            self.samples.unique_hit = s;
        }
        if let Some(out) = &o.out {
            self.output_path = Some(out.clone());
        }
    }

    pub fn distribution(&self) -> PairDistribution {
        self.distribution.unwrap_or(match self.regime {
            Regime::Uniform => PairDistribution::Nu { t: self.params.t },
            Regime::Biased { p } => PairDistribution::MuPq { p, q: 0.5 },
        })
    }

    /// Every problem found, each prefixed by the offending field.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let checks = [
            ("params", self.params.validate().map(|_| ())),
            ("corruption", self.corruption.validate()),
            ("prune", self.prune.config().map(|_| ())),
        ];
        for (field, r) in checks {
            if let Err(e) = r {
                out.push(format!("{field}: {e}"));
            }
        }
        if out.is_empty() {
            if let Err(e) = self.trial_spec(false).validate() {
                out.push(format!("distribution: {e}"));
            }
        }
        if let Regime::Biased { p } = self.regime {
            if !(p > 0.0 && p < 1.0) {
                out.push(format!("regime.p: {p} outside (0, 1)"));
            }
        }
        for (i, r) in self.sweep.rates.iter().enumerate() {
            if !(0.0..=1.0).contains(r) {
                out.push(format!("sweep.rates[{i}]: {r} outside [0, 1]"));
            }
        }
        if self.sweep.trials == 0 {
            out.push("sweep.trials: must be positive".into());
        }
        let s = &self.samples;
        for (name, v) in [("agree", s.agree), ("decode_per_point", s.decode_per_point), ("disagreement", s.disagreement), ("pool", s.pool)] {
            if v == 0 {
                out.push(format!("samples.{name}: must be positive"));
            }
        }
        for (name, v) in [("hit", s.hit), ("unique_hit", s.unique_hit)] {
            if v < 100 {
                out.push(format!("samples.{name}: needs at least 100 draws"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            bail!("invalid configuration:\n  {}", problems.join("\n  "))
        }
    }

    pub fn trial_spec(&self, exact: bool) -> TrialSpec {
        TrialSpec {
            params: self.params,
            include_empty: self.include_empty,
            regime: self.regime,
            distribution: self.distribution(),
            corruption: self.corruption.clone(),
            samples: SampleCounts {
                agree: self.samples.agree,
                decode_per_point: self.samples.decode_per_point,
                disagreement: self.samples.disagreement,
            },
            exact,
        }
    }

    pub fn sweep_plan(&self) -> SweepPlan {
        SweepPlan { rates: self.sweep.rates.clone(), ns: self.sweep.ns.clone(), trials: self.sweep.trials }
    }
}
