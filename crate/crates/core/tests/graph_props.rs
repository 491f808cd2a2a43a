use std::collections::BTreeSet;

use llmpc_core::graph::{cpdag_of, d_separated, minimal_separator, CausalGraph, GraphFile};
use llmpc_core::scm::random_dag;
use proptest::prelude::*;

fn descendants(g: &CausalGraph, v: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([v]);
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        for w in 0..g.n_nodes() {
            if g.has_directed(u, w) && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen
}

/// Whether some simple path between `x` and `y` is open given `s`.
fn open_path_exists(g: &CausalGraph, x: usize, y: usize, s: &BTreeSet<usize>) -> bool {
    fn walk(g: &CausalGraph, path: &mut Vec<usize>, y: usize, s: &BTreeSet<usize>) -> bool {
        let last = *path.last().unwrap();
        if last == y {
            return path.windows(3).all(|w| {
                let (a, b, c) = (w[0], w[1], w[2]);
                if g.has_directed(a, b) && g.has_directed(c, b) {
                    descendants(g, b).iter().any(|d| s.contains(d))
                } else {
                    !s.contains(&b)
                }
            });
        }
        for next in 0..g.n_nodes() {
            if g.is_adjacent(last, next) && !path.contains(&next) {
                path.push(next);
                if walk(g, path, y, s) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    walk(g, &mut vec![x], y, s)
}

fn subsets(items: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (0..1u32 << items.len()).map(move |mask| {
        items
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &v)| v)
            .collect()
    })
}

fn acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut indeg = vec![0; n];
    for &(_, v) in edges {
        indeg[v] += 1;
    }
    let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut done = 0;
    while let Some(u) = ready.pop() {
        done += 1;
        for &(a, b) in edges {
            if a == u {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    ready.push(b);
                }
            }
        }
    }
    done == n
}

fn v_structures(n: usize, edges: &BTreeSet<(usize, usize)>) -> BTreeSet<(usize, usize, usize)> {
    let adj = |a: usize, b: usize| edges.contains(&(a, b)) || edges.contains(&(b, a));
    let mut out = BTreeSet::new();
    for b in 0..n {
        for a in 0..n {
            for c in (a + 1)..n {
                if edges.contains(&(a, b)) && edges.contains(&(c, b)) && !adj(a, c) {
                    out.insert((a, b, c));
                }
            }
        }
    }
    out
}

fn dag_strategy(max_nodes: usize) -> impl Strategy<Value = CausalGraph> {
    (2..=max_nodes, 0.1f64..0.7, any::<u64>()).prop_map(|(n, p, seed)| random_dag(n, p, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn topological_order_respects_edges(g in dag_strategy(12)) {
        let order = g.topological_order().unwrap();
        let mut sorted = order.clone();
        sorted.sort();
        prop_assert_eq!(sorted, (0..g.n_nodes()).collect::<Vec<_>>());
        let pos: Vec<usize> = {
            let mut p = vec![0; order.len()];
            for (i, &v) in order.iter().enumerate() {
                p[v] = i;
            }
            p
        };
        for (u, v) in g.directed_edges() {
            prop_assert!(pos[u] < pos[v]);
        }
    }

    #[test]
    fn d_separation_matches_path_enumeration(g in dag_strategy(6)) {
        let n = g.n_nodes();
        for x in 0..n {
            for y in (x + 1)..n {
                let rest: Vec<usize> = (0..n).filter(|&v| v != x && v != y).collect();
                for s in subsets(&rest) {
                    let expected = !open_path_exists(&g, x, y, &s.iter().copied().collect());
                    prop_assert_eq!(d_separated(&g, x, y, &s).unwrap(), expected, "{} {} {:?}", x, y, s);
                    prop_assert_eq!(d_separated(&g, y, x, &s).unwrap(), expected);
                }
            }
        }
    }

    #[test]
    fn minimal_separators_separate_minimally(g in dag_strategy(8)) {
        let n = g.n_nodes();
        for x in 0..n {
            for y in (x + 1)..n {
                let sep = minimal_separator(&g, x, y).unwrap();
                prop_assert_eq!(sep.is_none(), g.is_adjacent(x, y));
                let Some(sep) = sep else { continue };
                prop_assert!(d_separated(&g, x, y, &sep).unwrap());
                for i in 0..sep.len() {
                    let mut smaller = sep.clone();
                    smaller.remove(i);
                    prop_assert!(!d_separated(&g, x, y, &smaller).unwrap(), "{:?} not minimal", sep);
                }
            }
        }
    }

    #[test]
    fn cpdag_keeps_skeleton_and_v_structures(g in dag_strategy(8)) {
        let c = cpdag_of(&g).unwrap();
        prop_assert_eq!(c.skeleton(), g.skeleton());
        prop_assert_eq!(c.v_structures(), g.v_structures());
        for (u, v) in c.directed_edges() {
            prop_assert!(g.has_directed(u, v));
        }
    }

    #[test]
    fn cpdag_matches_equivalence_class(g in dag_strategy(5)) {
        let n = g.n_nodes();
        let pairs: Vec<(usize, usize)> = g.skeleton().into_iter().collect();
        let truth: BTreeSet<(usize, usize)> = g.directed_edges().collect();
        let target = v_structures(n, &truth);
        let mut seen: Vec<BTreeSet<bool>> = vec![BTreeSet::new(); pairs.len()];
        for mask in 0..1u32 << pairs.len() {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| if mask >> i & 1 == 1 { (b, a) } else { (a, b) })
                .collect();
            if !acyclic(n, &edges) {
                continue;
            }
            let set: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
            if v_structures(n, &set) != target {
                continue;
            }
            for (i, &(a, b)) in pairs.iter().enumerate() {
                seen[i].insert(set.contains(&(a, b)));
            }
        }
        let c = cpdag_of(&g).unwrap();
        for (i, &(a, b)) in pairs.iter().enumerate() {
            if seen[i].len() == 2 {
                prop_assert!(c.has_undirected(a, b), "{}-{} should be undirected", a, b);
            } else if seen[i].contains(&true) {
                prop_assert!(c.has_directed(a, b));
            } else {
                prop_assert!(c.has_directed(b, a));
            }
        }
    }

    #[test]
    fn serialization_round_trip(
        n in 1usize..9,
        prefix in prop::sample::select(vec!["X", "node ", "\u{e4}", "q\"", "back\\slash", "tab\t"]),
        marks in prop::collection::vec(0u8..4, 36),
        forbid in prop::collection::vec(any::<bool>(), 72),
    ) {
        let names: Vec<String> = (0..n).map(|i| format!("{prefix}{i}")).collect();
        let mut g = CausalGraph::with_nodes(&names).unwrap();
        let mut k = 0;
        for a in 0..n {
            for b in (a + 1)..n {
                match marks[k] {
                    1 => g.add_directed(a, b).unwrap(),
                    2 => g.add_directed(b, a).unwrap(),
                    3 => g.add_undirected(a, b).unwrap(),
                    _ => {}
                }
                k += 1;
            }
        }
        let forbidden = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && forbid[a * 8 + b] && !g.has_directed(a, b))
            .collect();
        let mut file = GraphFile::new("round trip", g);
        file.forbidden = forbidden;
        let text = file.to_json();
        let back = GraphFile::parse(&text).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(back.to_json(), text);
    }
}
