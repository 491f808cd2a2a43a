use std::collections::BTreeSet;

use llmpc_core::ci::{DSepOracle, FisherZ, Kci, KciConfig, TestKind};
use llmpc_core::graph::{cpdag_of, CausalGraph};
use llmpc_core::pc::{discover, PcConfig, PcError, PriorKnowledge};
use llmpc_core::scm::{build_scm, random_dag, MechanismSpec, NoiseSpec};
use proptest::prelude::*;

fn adjacencies(g: &CausalGraph) -> BTreeSet<(usize, usize)> {
    g.skeleton()
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).filter(|(a, b)| a != b).collect()
}

fn pick(all: &[(usize, usize)], mask: &[bool]) -> Vec<(usize, usize)> {
    all.iter().zip(mask).filter(|(_, &m)| m).map(|(&p, _)| p).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn oracle_recovers_the_cpdag(n in 2usize..=8, p in prop::sample::select(vec![0.2, 0.4]), seed in any::<u64>()) {
        let truth = random_dag(n, p, seed);
        let out = discover(&DSepOracle::new(truth.clone()).unwrap(), &PcConfig::for_test(TestKind::DSepOracle), &PriorKnowledge::default()).unwrap();
        let c = cpdag_of(&truth).unwrap();
        prop_assert_eq!(out.graph.named_directed_edges(), c.named_directed_edges());
        prop_assert_eq!(out.graph.named_undirected_edges(), c.named_undirected_edges());
        for (&(a, b), s) in &out.skeleton.sepsets {
            prop_assert!(!s.contains(&a) && !s.contains(&b));
            prop_assert!(!out.graph.is_adjacent(a, b));
        }
    }

    #[test]
    fn required_pairs_stay_adjacent(n in 3usize..=7, seed in any::<u64>(), mask in prop::collection::vec(prop::bool::weighted(0.15), 42)) {
        let truth = random_dag(n, 0.3, seed);
        let data = build_scm(&truth, MechanismSpec::linear(), NoiseSpec::default(), seed).unwrap().sample(300, 1).unwrap();
        let chosen = pick(&pairs(n), &mask);
        // one direction per pair
        let required: Vec<(usize, usize)> = chosen
            .iter()
            .copied()
            .filter(|&(a, b)| a < b || !chosen.contains(&(b, a)))
            .collect();
        let prior = PriorKnowledge::new(required.clone(), []).unwrap();
        let out = discover(&FisherZ::new(&data), &PcConfig::default(), &prior).unwrap();
        for (a, b) in required {
            prop_assert!(out.graph.has_directed(a, b), "{} -> {} missing", a, b);
        }
    }

    #[test]
    fn doubly_forbidden_pairs_never_adjacent(n in 3usize..=7, seed in any::<u64>(), mask in prop::collection::vec(prop::bool::weighted(0.3), 21)) {
        let truth = random_dag(n, 0.5, seed);
        let unordered: Vec<(usize, usize)> = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
        let chosen = pick(&unordered, &mask);
        let forbidden: Vec<(usize, usize)> = chosen.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
        let prior = PriorKnowledge::new([], forbidden).unwrap();
        let out = discover(&DSepOracle::new(truth).unwrap(), &PcConfig::for_test(TestKind::DSepOracle), &prior).unwrap();
        for (a, b) in chosen {
            prop_assert!(!out.graph.is_adjacent(a, b));
            prop_assert!(out.skeleton.excluded.contains_key(&(a, b)));
        }
    }

    #[test]
    fn required_edges_only_add_adjacencies(n in 3usize..=7, seed in any::<u64>(), a in 0usize..7, b in 0usize..7) {
        prop_assume!(a < n && b < n && a != b);
        let truth = random_dag(n, 0.4, seed);
        let oracle = DSepOracle::new(truth).unwrap();
        let cfg = PcConfig::for_test(TestKind::DSepOracle);
        let plain = discover(&oracle, &cfg, &PriorKnowledge::default()).unwrap();
        let with = discover(&oracle, &cfg, &PriorKnowledge::new([(a, b)], []).unwrap()).unwrap();
        let before = adjacencies(&plain.graph);
        let after = adjacencies(&with.graph);
        prop_assert!(before.is_subset(&after));
        prop_assert!(after.contains(&(a.min(b), a.max(b))));
    }
}

#[test]
fn output_independent_of_worker_count() {
    let truth = random_dag(6, 0.4, 3);
    let data = build_scm(&truth, MechanismSpec::mlp(), NoiseSpec::default(), 3).unwrap().sample(200, 4).unwrap();
    let kci = Kci::new(&data, KciConfig { seed: 9, ..KciConfig::default() });
    let cfg = PcConfig {
        alpha: 0.05,
        max_cond_size: Some(2),
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let out = discover(&kci, &cfg, &PriorKnowledge::default()).unwrap();
            (out.graph, out.skeleton.sepsets)
        })
    };
    let one = run(1);
    assert_eq!(run(3), one);
    assert_eq!(run(8), one);
}

#[test]
fn contradictory_priors_are_rejected() {
    assert!(matches!(PriorKnowledge::new([(0, 1)], [(0, 1)]), Err(PcError::Prior(_))));
    assert!(matches!(PriorKnowledge::new([(2, 2)], []), Err(PcError::Prior(_))));
    let vars = vec!["A".to_string(), "B".to_string()];
    let unknown = PriorKnowledge::from_names(&vars, &[("A".into(), "Z".into())], &[]);
    assert!(matches!(unknown, Err(PcError::Prior(_))));
}

#[test]
fn single_forbidden_direction_keeps_reverse_possible() {
    // A -> B is true; forbidding only B -> A must not change anything, while
    // forbidding A -> B without requiring B -> A drops the pair.
    let mut truth = CausalGraph::with_nodes(["A", "B"]).unwrap();
    truth.add_directed(0, 1).unwrap();
    let oracle = DSepOracle::new(truth).unwrap();
    let cfg = PcConfig::for_test(TestKind::DSepOracle);
    let keep = discover(&oracle, &cfg, &PriorKnowledge::new([(0, 1)], [(1, 0)]).unwrap()).unwrap();
    assert!(keep.graph.has_directed(0, 1));
    let drop = discover(&oracle, &cfg, &PriorKnowledge::new([], [(0, 1)]).unwrap()).unwrap();
    assert!(!drop.graph.is_adjacent(0, 1));
    let flipped = discover(&oracle, &cfg, &PriorKnowledge::new([(1, 0)], [(0, 1)]).unwrap()).unwrap();
    assert!(flipped.graph.has_directed(1, 0));
}
