use serde::Serialize;

use super::CausalGraph;

/// Summary counts for a causal graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_colliders: usize,
    pub in_degree_min: usize,
    pub in_degree_median: usize,
    pub in_degree_max: usize,
    /// Edge count of the longest directed path; `None` when the directed
    /// part has a cycle.
    pub longest_directed_path: Option<usize>,
}

/// Computes [`GraphStats`]. Colliders are triples `a -> b <- c` counted once
/// per unordered parent pair; with `unshielded_only` the parents must also be
/// non-adjacent. In-degrees and paths use directed edges only; the median is
/// the lower median.
pub fn graph_stats(g: &CausalGraph, unshielded_only: bool) -> GraphStats {
    let n = g.n_nodes();
    let (pa, ch) = g.directed_adjacency();

    let mut n_colliders = 0;
    for parents in &pa {
        for (i, &a) in parents.iter().enumerate() {
            for &c in &parents[i + 1..] {
                if !unshielded_only || !g.is_adjacent(a, c) {
                    n_colliders += 1;
                }
            }
        }
    }

    let mut indeg: Vec<usize> = pa.iter().map(Vec::len).collect();
    indeg.sort_unstable();
    let (min, median, max) = if indeg.is_empty() {
        (0, 0, 0)
    } else {
        (indeg[0], indeg[(indeg.len() - 1) / 2], indeg[indeg.len() - 1])
    };

    let longest = if g.directed_part_is_acyclic() {
        let order = g.kahn();
        let mut depth = vec![0usize; n];
        for &u in &order {
            for &v in &ch[u] {
                depth[v] = depth[v].max(depth[u] + 1);
            }
        }
        Some(depth.into_iter().max().unwrap_or(0))
    } else {
        None
    };

    GraphStats {
        n_nodes: n,
        n_edges: g.n_edges(),
        n_colliders,
        in_degree_min: min,
        in_degree_median: median,
        in_degree_max: max,
        longest_directed_path: longest,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge() {
        let mut g = CausalGraph::with_nodes(["A", "B"]).unwrap();
        g.add_directed(0, 1).unwrap();
        let s = graph_stats(&g, false);
        assert_eq!((s.in_degree_min, s.in_degree_median, s.in_degree_max), (0, 0, 1));
        assert_eq!(s.longest_directed_path, Some(1));
        assert_eq!(s.n_colliders, 0);
    }

    #[test]
    fn shielded_collider_flag() {
        // a -> c <- b plus a -> b: shielded
        let mut g = CausalGraph::with_nodes(["a", "b", "c"]).unwrap();
        g.add_directed(0, 2).unwrap();
        g.add_directed(1, 2).unwrap();
        g.add_directed(0, 1).unwrap();
        assert_eq!(graph_stats(&g, false).n_colliders, 1);
        assert_eq!(graph_stats(&g, true).n_colliders, 0);
        assert_eq!(graph_stats(&g, false).longest_directed_path, Some(2));
    }
}
