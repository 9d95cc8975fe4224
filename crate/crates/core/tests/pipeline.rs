use agreement_core::agreement::{agreement_exact, PairDistribution};
use agreement_core::decode::{disagreement_rate, plurality_decode};
use agreement_core::ensemble::{CorruptionMode, CorruptionSpec, GlobalFunction, LocalEnsemble, Regime};
use agreement_core::experiment::{run_sweep, SampleCounts, SweepPlan, TrialSpec};
use agreement_core::pruning::{prune_biased, HitOracle, PruneConfig};
use agreement_core::rng::stream;
use agreement_core::{EvalMode, Hypergraph, TestParams, VertexSet};
use proptest::prelude::*;

fn small_spec(rate: f64) -> TrialSpec {
    TrialSpec {
        params: TestParams { n: 14, k: 4, t: 2, d: 1, alphabet_size: 3 },
        include_empty: false,
        regime: Regime::Uniform,
        distribution: PairDistribution::Nu { t: 2 },
        corruption: CorruptionSpec::new(CorruptionMode::FlipEntry, rate),
        samples: SampleCounts { agree: 800, decode_per_point: 30, disagreement: 800 },
        exact: false,
    }
}

fn sweep_rows(threads: usize) -> (Vec<u64>, Vec<u64>) {
    let plan = SweepPlan { rates: vec![0.0, 0.1, 0.3], ns: vec![14, 20], trials: 3 };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let mut streamed = Vec::new();
    let outcomes = pool
        .install(|| {
            run_sweep(&small_spec(0.0), &plan, 77, |o| {
                streamed.push(o.seed);
                Ok(())
            })
        })
        .unwrap();
    let fingerprint = outcomes
        .iter()
        .map(|o| o.agreement.epsilon_hat.to_bits() ^ o.decode_disagreement.value.to_bits().rotate_left(17))
        .collect();
    assert_eq!(streamed, outcomes.iter().map(|o| o.seed).collect::<Vec<_>>());
    (streamed, fingerprint)
}

#[test]
fn sweep_ignores_thread_count() {
    let one = sweep_rows(1);
    assert_eq!(one.0.len(), 18);
    assert_eq!(one, sweep_rows(4));
}

#[test]
fn saved_corruption_replays_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let g = GlobalFunction::random(9, 2, 3, false, &mut stream(1, "global", 0)).unwrap();
    let e = LocalEnsemble::from_global(g, 4)
        .unwrap()
        .corrupt_with_seed(CorruptionSpec::new(CorruptionMode::FlipEntry, 0.1), 5)
        .unwrap()
        .corrupt_with_seed(CorruptionSpec::new(CorruptionMode::ReplaceSet, 0.05), 6)
        .unwrap();
    let path = dir.path().join("e.json");
    e.save(&path).unwrap();
    let back = LocalEnsemble::load(&path).unwrap();
    let a = agreement_exact(&e, 2).unwrap();
    let b = agreement_exact(&back, 2).unwrap();
    assert_eq!(a.epsilon_hat, b.epsilon_hat);
    assert!(a.epsilon_hat > 0.0);
    let explicit = back.to_explicit().unwrap();
    assert_eq!(agreement_exact(&explicit, 2).unwrap().epsilon_hat, a.epsilon_hat);
}

#[test]
fn light_noise_decodes_to_the_original() {
    let g = GlobalFunction::random(10, 1, 4, false, &mut stream(3, "global", 0)).unwrap();
    let e = LocalEnsemble::from_global(g.clone(), 5)
        .unwrap()
        .corrupt_with_seed(CorruptionSpec::new(CorruptionMode::FlipEntry, 0.05), 9)
        .unwrap();
    let decoded = plurality_decode(&e, EvalMode::Exact).unwrap();
    assert_eq!(decoded.distance(&g), 0);
    let dis = disagreement_rate(&e, &decoded, EvalMode::Exact).unwrap().value;
    assert!(dis > 0.0 && dis < 0.5, "{dis}");
}

fn hypergraph_strategy() -> impl Strategy<Value = Hypergraph> {
    (6usize..=10, 1usize..=2).prop_flat_map(|(n, d)| {
        prop::collection::btree_set(prop::collection::btree_set(0..n, d), 1..12).prop_map(move |edges| {
            Hypergraph::new(n, edges.into_iter().map(VertexSet::from_indices)).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn pruning_keeps_a_bounded_subgraph(h in hypergraph_strategy(), c in 0.3f64..0.9) {
        let cfg = PruneConfig::new(c, 0.2, 0.25).unwrap();
        let pruned = prune_biased(&h, &cfg, &HitOracle::with_seed(4)).unwrap();
        prop_assert!(pruned.is_subhypergraph_of(&h));
        prop_assert!(pruned.check_branching(cfg.rho()).unwrap().ok);
    }

    #[test]
    fn text_format_round_trips(h in hypergraph_strategy()) {
        let back = Hypergraph::parse_text(&h.to_text()).unwrap();
        prop_assert_eq!(back.n(), h.n());
        prop_assert!(back.is_subhypergraph_of(&h) && h.is_subhypergraph_of(&back));
    }
}
