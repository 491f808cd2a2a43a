use llmpc_core::ci::{CiError, CiTest, DSepOracle, FisherZ, Kci, KciConfig, TestKind};
use llmpc_core::data::Dataset;
use llmpc_core::graph::CausalGraph;
use llmpc_core::scm::{build_scm, random_dag, MechanismSpec, NoiseSpec};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn synthetic(n_vars: usize, n: usize, seed: u64) -> Dataset {
    let g = random_dag(n_vars, 0.4, seed);
    build_scm(&g, MechanismSpec::mlp(), NoiseSpec::default(), seed)
        .unwrap()
        .sample(n, seed + 1)
        .unwrap()
}

fn with_values(data: &Dataset, values: DMatrix<f64>) -> Dataset {
    Dataset::new(data.columns().to_vec(), values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn fisher_z_symmetric_and_bounded(seed in 0u64..10_000, x in 0usize..6, y in 0usize..6, mask in 0u32..64) {
        prop_assume!(x != y);
        let data = synthetic(6, 200, seed);
        let fz = FisherZ::new(&data);
        let s: Vec<usize> = (0..6).filter(|&v| v != x && v != y && mask >> v & 1 == 1).collect();
        let a = fz.test(x, y, &s).unwrap();
        let b = fz.test(y, x, &s).unwrap();
        prop_assert_eq!(a.statistic.to_bits(), b.statistic.to_bits());
        prop_assert_eq!(a.p_value.to_bits(), b.p_value.to_bits());
        prop_assert!((0.0..=1.0).contains(&a.p_value));
        prop_assert!(!a.cond_set.contains(&a.x) && !a.cond_set.contains(&a.y));
    }

    #[test]
    fn kci_shift_and_row_permutation_invariant(seed in 0u64..10_000, shift in -50.0f64..50.0, col in 0usize..3) {
        let data = synthetic(3, 150, seed);
        let cfg = KciConfig { seed, ..KciConfig::default() };
        let base = Kci::new(&data, cfg);
        let mut shifted = data.values().clone();
        for i in 0..shifted.nrows() {
            shifted[(i, col)] += shift;
        }
        let n = data.n_samples();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % n).collect();
        let permuted = DMatrix::from_fn(n, 3, |i, j| data.values()[(perm[i], j)]);
        let moved = Kci::new(&with_values(&data, shifted), cfg);
        let rows = Kci::new(&with_values(&data, permuted), cfg);
        for (x, y, s) in [(0, 1, vec![]), (0, 2, vec![1]), (1, 2, vec![0])] {
            let r = base.test(x, y, &s).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            let m = moved.test(x, y, &s).unwrap();
            let p = rows.test(x, y, &s).unwrap();
            prop_assert!((r.statistic - m.statistic).abs() <= 1e-8 * r.statistic.abs().max(1.0));
            prop_assert!((r.statistic - p.statistic).abs() <= 1e-8 * r.statistic.abs().max(1.0));
        }
    }
}

#[test]
fn fisher_z_p_value_monotone_in_statistic() {
    let data = synthetic(7, 300, 5);
    let fz = FisherZ::new(&data);
    let mut results = Vec::new();
    for x in 0..7 {
        for y in (x + 1)..7 {
            for z in 0..7 {
                let s: Vec<usize> = if z == x || z == y { vec![] } else { vec![z] };
                results.push(fz.test(x, y, &s).unwrap());
            }
        }
    }
    results.sort_by(|a, b| a.statistic.abs().total_cmp(&b.statistic.abs()));
    for w in results.windows(2) {
        assert!(w[1].p_value <= w[0].p_value, "{} then {}", w[0].p_value, w[1].p_value);
    }
}

#[test]
fn bad_queries_are_rejected() {
    let data = synthetic(3, 50, 1);
    let fz = FisherZ::new(&data);
    assert!(matches!(fz.test(0, 0, &[]), Err(CiError::BadQuery(_))));
    assert!(matches!(fz.test(0, 1, &[1]), Err(CiError::BadQuery(_))));
    assert!(matches!(fz.test(0, 5, &[]), Err(CiError::BadQuery(_))));
    let constant = Dataset::from_rows(vec!["a".into(), "b".into()], &[vec![1.0, 0.3], vec![1.0, 0.5], vec![1.0, 0.1]]).unwrap();
    let k = Kci::new(&constant, KciConfig::default());
    assert!(k.test(0, 1, &[]).is_err());
}

#[test]
fn oracle_reports_d_separation() {
    let mut g = CausalGraph::with_nodes(["A", "B", "C"]).unwrap();
    g.add_directed(0, 2).unwrap();
    g.add_directed(1, 2).unwrap();
    let o = DSepOracle::new(g).unwrap();
    assert_eq!(o.kind(), TestKind::DSepOracle);
    assert_eq!(o.test_by_name("A", "B", &[]).unwrap().p_value, 1.0);
    assert_eq!(o.test_by_name("A", "B", &["C"]).unwrap().p_value, 0.0);
}
