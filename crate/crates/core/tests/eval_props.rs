use llmpc_core::eval::{bench_matrix, edge_metrics, f1_score, BenchConfig, EvalReport, MatchMode};
use llmpc_core::graph::CausalGraph;
use proptest::prelude::*;

fn graph_from(n: usize, marks: &[u8], order: &[usize]) -> CausalGraph {
    let names: Vec<String> = order.iter().map(|i| format!("V{i}")).collect();
    let mut g = CausalGraph::with_nodes(&names).unwrap();
    let pos = |v: usize| order.iter().position(|&o| o == v).unwrap();
    let mut k = 0;
    for a in 0..n {
        for b in (a + 1)..n {
            match marks[k] {
                1 => g.add_directed(pos(a), pos(b)).unwrap(),
                2 => g.add_directed(pos(b), pos(a)).unwrap(),
                3 => g.add_undirected(pos(a), pos(b)).unwrap(),
                _ => {}
            }
            k += 1;
        }
    }
    g
}

fn harmonic(r: &EvalReport) -> bool {
    let p = r.precision;
    let q = r.recall;
    let expected = if p + q == 0.0 { 0.0 } else { 2.0 * p * q / (p + q) };
    (r.f1 - expected).abs() < 1e-12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn metric_identities(n in 2usize..8, a in prop::collection::vec(0u8..4, 21), b in prop::collection::vec(0u8..4, 21), seed in any::<u64>()) {
        let ident: Vec<usize> = (0..n).collect();
        let mut shuffled = ident.clone();
        shuffled.sort_by_key(|&i| (i as u64).wrapping_mul(seed | 1).rotate_left(17));
        let pred = graph_from(n, &a, &ident);
        let truth = graph_from(n, &b, &ident);
        let strict = edge_metrics(&pred, &truth, MatchMode::DirectedStrict).unwrap();
        let skel = edge_metrics(&pred, &truth, MatchMode::Skeleton).unwrap();
        let aware = edge_metrics(&pred, &truth, MatchMode::CpdagAware).unwrap();
        for r in [&strict, &skel, &aware] {
            prop_assert!(harmonic(r));
            prop_assert!((0.0..=1.0).contains(&r.f1));
        }
        prop_assert!(skel.precision >= strict.precision && skel.recall >= strict.recall && skel.f1 >= strict.f1);
        prop_assert!(aware.tp >= strict.tp);
        let relabeled = edge_metrics(&graph_from(n, &a, &shuffled), &graph_from(n, &b, &shuffled), MatchMode::DirectedStrict).unwrap();
        prop_assert_eq!(relabeled, strict);
        let self_score = edge_metrics(&truth, &truth, MatchMode::DirectedStrict).unwrap();
        prop_assert!(truth.n_edges() == 0 || self_score.f1 == 1.0);
    }
}

#[test]
fn worked_f1_examples() {
    assert!((f1_score(0.64, 0.80) - 0.711).abs() < 1e-3);
    assert!((f1_score(0.90, 0.45) - 0.60).abs() < 1e-12);
    assert_eq!(f1_score(0.0, 0.0), 0.0);
}

fn bench_config() -> BenchConfig {
    let text = r#"
seeds = [0, 1]
alphas = [0.05, 0.1]
n_samples = 400
mode = "cpdag_aware"

[[datasets]]
name = "chain"
graph = "chain3.json"
mechanism = "linear"

[[datasets]]
name = "asia"
graph = "asia.json"

[[methods]]
name = "oracle"
ci = "oracle"

[[methods]]
name = "fz"
ci = "fisher_z"

[[methods]]
name = "fz+prior"
ci = "fisher_z"
prior = "rewired"
forbid_fraction = 0.3

[[methods]]
name = "prior only"
ci = "none"
prior = "truth"
"#;
    let base = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/graphs");
    BenchConfig::parse(text, base).unwrap()
}

#[test]
fn bench_grid_shape_and_determinism() {
    let cfg = bench_config();
    let a = bench_matrix(&cfg).unwrap();
    assert_eq!(a.rows.len(), 4 * 2 * 2 * 2);
    assert!(a.errors().is_empty(), "{:?}", a.errors_json());
    for r in a.rows.iter().filter(|r| r.method == "oracle" || r.method == "prior only") {
        assert_eq!(r.f1, Some(1.0), "{r:?}");
    }
    let b = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| bench_matrix(&cfg).unwrap());
    assert_eq!(a.runs_csv(), b.runs_csv());
    assert_eq!(a.summary_csv().lines().count(), 1 + 4 * 2 * 2);
    let md = a.markdown();
    assert!(md.lines().next().unwrap().contains("asia Pre"));
    assert_eq!(md.lines().count(), 2 + 4 * 2);
}

#[test]
fn bench_errors_are_rows() {
    let mut cfg = bench_config();
    cfg.datasets[0].graph = "missing.json".into();
    let report = bench_matrix(&cfg).unwrap();
    let errors = report.errors();
    assert_eq!(errors.len(), 4 * 2 * 2);
    assert!(errors.iter().all(|r| r.dataset == "chain" && r.f1.is_none()));
}

#[test]
fn bench_config_validation() {
    let base = std::path::Path::new(".");
    assert!(BenchConfig::parse("datasets = []\nmethods = []\n", base).is_err());
    let unknown = "bogus = 1\n[[datasets]]\nname='a'\ngraph='g.json'\n[[methods]]\nname='m'\nci='oracle'\n";
    assert!(BenchConfig::parse(unknown, base).is_err());
    let bad_ci = "[[datasets]]\nname='a'\ngraph='g.json'\n[[methods]]\nname='m'\nci='magic'\n";
    assert!(BenchConfig::parse(bad_ci, base).is_err());
}
