//! Subcommand bodies. Each returns a [`Status`]; reports go to the output
//! path when one is configured and to stdout otherwise.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use agreement_core::agreement::{agreement_estimate, agreement_exact, AgreementReport, PairDistribution};
use agreement_core::decode::{
    disagreement_rate, plurality_decode_with, restricted_decode, DecoderDiagnostics, PluralityConfig, RestrictedConfig,
};
use agreement_core::ensemble::{GlobalFunction, LocalEnsemble};
use agreement_core::experiment::{build_instance, run_sweep, CSV_HEADER};
use agreement_core::hypergraph::{HitMode, Hypergraph};
use agreement_core::pruning::{prune_biased_traced, prune_uniform, verify_unique_hit, HitOracle, PruneTrace};
use agreement_core::rng::{derive_seed, stream};
use agreement_core::setcore::VertexSet;
use agreement_core::stats::{EvalMode, Estimate};
use agreement_core::Error;
use anyhow::{bail, Context, Result};
use log::info;
use serde::Serialize;

use crate::config::ExperimentConfig;

/// How a successful run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// The run finished but a checked property does not hold.
    PropertyFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::PropertyFailed => 2,
        }
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit<T: Serialize>(cfg: &ExperimentConfig, report: &T) -> Result<()> {
    let mut out = sink(cfg.output_path.as_deref())?;
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn load_ensemble(input: Option<&Path>, cfg: &ExperimentConfig) -> Result<LocalEnsemble> {
    match input {
        Some(p) => LocalEnsemble::load(p).with_context(|| format!("loading ensemble {}", p.display())),
        None => {
            info!("no --input given; generating the ensemble from the configuration");
            Ok(build_instance(&cfg.trial_spec(false), cfg.seed)?.1)
        }
    }
}

fn load_hypergraph(input: &Path) -> Result<Hypergraph> {
    Hypergraph::read_text(input).with_context(|| format!("loading hypergraph {}", input.display()))
}

pub fn gen(cfg: &ExperimentConfig) -> Result<Status> {
    let (_, e) = build_instance(&cfg.trial_spec(false), cfg.seed)?;
    write_ensemble(cfg, &e)
}

fn write_ensemble(cfg: &ExperimentConfig, e: &LocalEnsemble) -> Result<Status> {
    let json = e.to_json()?;
    let mut out = sink(cfg.output_path.as_deref())?;
    writeln!(out, "{json}")?;
    out.flush()?;
    Ok(Status::Ok)
}

pub fn corrupt(cfg: &ExperimentConfig, input: &Path) -> Result<Status> {
    let e = LocalEnsemble::load(input).with_context(|| format!("loading ensemble {}", input.display()))?;
    let corrupted = e.corrupt_with_seed(cfg.corruption.clone(), derive_seed(cfg.seed, "corrupt", 0))?;
    write_ensemble(cfg, &corrupted)
}

pub fn agree(cfg: &ExperimentConfig, input: Option<&Path>, exact: bool) -> Result<Status> {
    let e = load_ensemble(input, cfg)?;
    let report: AgreementReport = match (exact, cfg.distribution()) {
        (true, PairDistribution::Nu { t }) => agreement_exact(&e, t)?,
        (true, _) => bail!("exact agreement is only available for nu pairs"),
        (false, dist) => agreement_estimate(&e, dist, cfg.samples.agree, &mut stream(cfg.seed, "agree", 0))?,
    };
    emit(cfg, &report)?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct RestrictedReport {
    t: VertexSet,
    candidate: Option<GlobalFunction>,
    diagnostics: DecoderDiagnostics,
}

#[derive(Serialize)]
struct DecodeReport {
    global: GlobalFunction,
    disagreement: Estimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    restricted: Option<RestrictedReport>,
}

pub struct DecodeOptions {
    pub tie_seed: Option<u64>,
    pub restricted: Option<VertexSet>,
    pub abort_threshold: f64,
}

pub fn decode(cfg: &ExperimentConfig, input: Option<&Path>, exact: bool, opts: &DecodeOptions) -> Result<Status> {
    let e = load_ensemble(input, cfg)?;
    let mode = |label: &str, samples: usize| if exact { EvalMode::Exact } else { EvalMode::mc(samples, derive_seed(cfg.seed, label, 0)) };
    let global = plurality_decode_with(
        &e,
        PluralityConfig { mode: mode("decode", cfg.samples.decode_per_point), tie_seed: opts.tie_seed },
    )?;
    let disagreement = disagreement_rate(&e, &global, mode("disagreement", cfg.samples.disagreement))?;
    let restricted = match &opts.restricted {
        None => None,
        Some(t) => {
            let rc = RestrictedConfig { mode: mode("restricted", cfg.samples.pool), abort_threshold: opts.abort_threshold };
            let out = restricted_decode(&e, t, &rc)?;
            Some(RestrictedReport { t: t.clone(), candidate: out.g, diagnostics: out.diagnostics })
        }
    };
    emit(cfg, &DecodeReport { global, disagreement, restricted })?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct PruneReport {
    input_edges: usize,
    output_edges: usize,
    c: f64,
    p: f64,
    rho: f64,
    branching_ok: bool,
    subhypergraph: bool,
    hit_input: Estimate,
    hit_output: Estimate,
    hit_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<PruneTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_unique_hit: Option<f64>,
    edges: Vec<VertexSet>,
}

fn oracle(cfg: &ExperimentConfig, label: &str) -> HitOracle {
    HitOracle { samples: cfg.samples.hit, seed: derive_seed(cfg.seed, label, 0), force_mc: false }
}

pub fn prune(cfg: &ExperimentConfig, input: &Path, pruned_out: Option<&PathBuf>) -> Result<Status> {
    let h = load_hypergraph(input)?;
    let oracle = oracle(cfg, "prune");
    let (pruned, c, p, trace, min_unique_hit) = match cfg.prune.k {
        None => {
            let pc = cfg.prune.config()?;
            let (pruned, trace) = prune_biased_traced(&h, &pc, &oracle)?;
            (pruned, pc.c, pc.p, Some(trace), None)
        }
        Some(k) => {
            let out = prune_uniform(&h, h.n(), k, cfg.prune.epsilon, &oracle)?;
            (out.pruned, out.c, out.p, None, Some(out.min_unique_hit))
        }
    };
    let rho = c / p;
    let mode = HitMode::Biased { p };
    let hit_input = oracle.hit(&h, mode)?;
    let hit_output = oracle.hit(&pruned, mode)?;
    let branching_ok = pruned.check_branching(rho)?.ok;
    let subhypergraph = pruned.is_subhypergraph_of(&h);
    if let Some(path) = pruned_out {
        pruned.write_text(path).with_context(|| format!("writing {}", path.display()))?;
    }
    let report = PruneReport {
        input_edges: h.len(),
        output_edges: pruned.len(),
        c,
        p,
        rho,
        branching_ok,
        subhypergraph,
        hit_ratio: if hit_input.value > 0.0 { hit_output.value / hit_input.value } else { 0.0 },
        hit_input,
        hit_output,
        trace,
        min_unique_hit,
        edges: pruned.edges().to_vec(),
    };
    emit(cfg, &report)?;
    Ok(if branching_ok && subhypergraph { Status::Ok } else { Status::PropertyFailed })
}

#[derive(Serialize)]
struct EdgeUniqueHit {
    edge: VertexSet,
    unique_hit: Estimate,
}

#[derive(Serialize)]
struct VerifyReport {
    mode: HitMode,
    threshold: f64,
    min_unique_hit: f64,
    ok: bool,
    edges: Vec<EdgeUniqueHit>,
}

pub fn verify(cfg: &ExperimentConfig, input: &Path, exact: bool) -> Result<Status> {
    let h = load_hypergraph(input)?;
    let mode = match cfg.prune.k {
        Some(k) => HitMode::Uniform { n: h.n(), k },
        None => HitMode::Biased { p: cfg.prune.p },
    };
    let threshold = 1.0 - cfg.prune.epsilon;
    let mut edges = Vec::with_capacity(h.len());
    let mut ok = true;
    for (i, e) in h.edges().iter().enumerate() {
        let mc = EvalMode::mc(cfg.samples.unique_hit, derive_seed(cfg.seed, "verify", i as u64));
        let est = match verify_unique_hit(&h, e, mode, EvalMode::Exact) {
            Ok(est) => est,
            Err(Error::ExactInfeasible(_)) if !exact => verify_unique_hit(&h, e, mode, mc)?,
            Err(other) => return Err(other.into()),
        };
        ok &= est.value >= threshold - 3.0 * est.sigma_at(threshold);
        edges.push(EdgeUniqueHit { edge: e.clone(), unique_hit: est });
    }
    let min_unique_hit = edges.iter().map(|x| x.unique_hit.value).fold(1.0, f64::min);
    emit(cfg, &VerifyReport { mode, threshold, min_unique_hit, ok, edges })?;
    Ok(if ok { Status::Ok } else { Status::PropertyFailed })
}

pub fn sweep(cfg: &ExperimentConfig, exact: bool) -> Result<Status> {
    let out = sink(cfg.output_path.as_deref())?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(CSV_HEADER)?;
    writer.flush()?;
    let spec = cfg.trial_spec(exact);
    let outcomes = run_sweep(&spec, &cfg.sweep_plan(), cfg.seed, |o| {
        writer.serialize(o.row()).and_then(|_| writer.flush().map_err(csv::Error::from)).map_err(|e| Error::Io(io::Error::other(e)))
    })?;
    info!("sweep finished: {} rows", outcomes.len());
    Ok(Status::Ok)
}

/// Parses `"0,3,7"` (or an empty string) into a vertex set.
pub fn parse_vertex_list(text: &str) -> Result<VertexSet> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(VertexSet::new());
    }
    let indices = text
        .split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("`{t}` is not a vertex index")))
        .collect::<Result<Vec<_>>>()?;
    Ok(VertexSet::from_indices(indices))
}
