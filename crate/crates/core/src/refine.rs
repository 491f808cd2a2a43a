//! Post-processing of discovered graphs: cycle removal, p-value based edge
//! pruning and dependence-driven edge expansion.
//!
//! Edge ties are broken by node order: `(u, v)` sorts before `(u', v')` when
//! `u < u'`, or `u == u'` and `v < v'`.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ci::{CiError, CiTest};
use crate::graph::{minimal_separator, CausalGraph, GraphError};

/// Cap on simple cycles enumerated per cycle-breaking round.
const CYCLE_CAP: usize = 50_000;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("CI test failed for ({x}, {y} | {cond:?}): {source}")]
    Ci {
        x: String,
        y: String,
        cond: Vec<String>,
        #[source]
        source: CiError,
    },
    #[error("graph variable `{0}` is missing from the data")]
    MissingVariable(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneOrder {
    /// Remove the most independent-looking edges first.
    #[default]
    HighestPFirst,
    LowestPFirst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneConfig {
    pub remove_fraction: f64,
    pub order: PruneOrder,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            remove_fraction: 0.0,
            order: PruneOrder::HighestPFirst,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeScore {
    pub edge: (usize, usize),
    pub witness: Vec<usize>,
    pub p_value: f64,
}

/// Chooses directions for undirected or newly added edges: a prior
/// direction if one is given, else the only direction that keeps the
/// directed part acyclic, else `min -> max` in node order.
#[derive(Debug, Clone, Default)]
pub struct DirectionResolver {
    prior: BTreeSet<(usize, usize)>,
}

impl DirectionResolver {
    pub fn new(prior: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self {
            prior: prior.into_iter().collect(),
        }
    }

    /// Direction for the pair `{a, b}` given the directed edges of `g`.
    pub fn choose(&self, g: &CausalGraph, a: usize, b: usize) -> (usize, usize) {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        if self.prior.contains(&(a, b)) {
            return (a, b);
        }
        if self.prior.contains(&(b, a)) {
            return (b, a);
        }
        let forward_cycles = g.has_directed_path(b, a);
        let backward_cycles = g.has_directed_path(a, b);
        if forward_cycles && !backward_cycles {
            (b, a)
        } else {
            (a, b)
        }
    }
}

/// Number of removals for a fraction of `n_edges`, `ceil(fraction * n)`.
pub fn removal_count(fraction: f64, n_edges: usize) -> usize {
    let raw = fraction * n_edges as f64;
    // guard against 0.1 * 30 = 3.0000000000000004
    let k = (raw - 1e-9).ceil().max(0.0) as usize;
    k.min(n_edges)
}

/// All simple directed cycles, each as its edge list, up to `cap` cycles.
fn simple_cycles(succ: &[Vec<usize>], cap: usize) -> Vec<Vec<(usize, usize)>> {
    fn walk(
        succ: &[Vec<usize>],
        start: usize,
        v: usize,
        on_path: &mut [bool],
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<(usize, usize)>>,
        cap: usize,
    ) {
        for &w in &succ[v] {
            if out.len() >= cap {
                return;
            }
            if w == start {
                let mut c: Vec<(usize, usize)> = path.windows(2).map(|p| (p[0], p[1])).collect();
                c.push((v, start));
                out.push(c);
            } else if w > start && !on_path[w] {
                on_path[w] = true;
                path.push(w);
                walk(succ, start, w, on_path, path, out, cap);
                path.pop();
                on_path[w] = false;
            }
        }
    }
    let n = succ.len();
    let mut out = Vec::new();
    let mut on_path = vec![false; n];
    for s in 0..n {
        if out.len() >= cap {
            break;
        }
        let mut path = vec![s];
        on_path[s] = true;
        walk(succ, s, s, &mut on_path, &mut path, &mut out, cap);
        on_path[s] = false;
    }
    out
}

/// Orients every undirected edge with `resolver`, then removes directed
/// edges until no cycle remains. Each round drops the edge lying on the most
/// enumerated cycles, preferring the last edge in node order on ties.
pub fn enforce_acyclicity(g: &CausalGraph, resolver: &DirectionResolver) -> CausalGraph {
    let mut out = g.empty_like();
    for (u, v) in g.directed_edges() {
        out.add_directed(u, v).expect("pair is free");
    }
    for (a, b) in g.undirected_edges() {
        let (u, v) = resolver.choose(&out, a, b);
        out.add_directed(u, v).expect("pair is free");
    }
    loop {
        let n = out.n_nodes();
        let mut succ = vec![Vec::new(); n];
        for (u, v) in out.directed_edges() {
            succ[u].push(v);
        }
        let cycles = simple_cycles(&succ, CYCLE_CAP);
        if cycles.is_empty() {
            return out;
        }
        let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for c in &cycles {
            for &e in c {
                *counts.entry(e).or_default() += 1;
            }
        }
        let (&victim, _) = counts
            .iter()
            .max_by(|(ea, ca), (eb, cb)| ca.cmp(cb).then(ea.cmp(eb)))
            .expect("a cycle has edges");
        out.remove_directed(victim.0, victim.1);
    }
}

/// Column of the test for every graph node, matched by name.
fn column_map(g: &CausalGraph, test: &dyn CiTest) -> Result<Vec<usize>, RefineError> {
    let vars = test.variables();
    g.nodes()
        .iter()
        .map(|node| {
            vars.iter()
                .position(|v| *v == node.name)
                .ok_or_else(|| RefineError::MissingVariable(node.name.clone()))
        })
        .collect()
}

fn run_test(
    test: &dyn CiTest,
    cols: &[usize],
    g: &CausalGraph,
    x: usize,
    y: usize,
    s: &[usize],
) -> Result<f64, RefineError> {
    let cs: Vec<usize> = s.iter().map(|&v| cols[v]).collect();
    test.test(cols[x], cols[y], &cs)
        .map(|r| r.p_value)
        .map_err(|source| RefineError::Ci {
            x: g.name(x).to_string(),
            y: g.name(y).to_string(),
            cond: s.iter().map(|&v| g.name(v).to_string()).collect(),
            source,
        })
}

fn require_dag(g: &CausalGraph) -> Result<(), RefineError> {
    if g.is_dag()? {
        Ok(())
    } else {
        let cycle = g.find_cycle().unwrap_or_default();
        Err(GraphError::Cycle(cycle.iter().map(|&i| g.name(i).to_string()).collect()).into())
    }
}

/// Scores every edge by a CI test between its endpoints given a minimal
/// separator in the graph without that edge, then removes
/// `ceil(fraction * |E|)` edges in the configured order. Scores are
/// returned in that order.
pub fn prune_edges(
    g: &CausalGraph,
    test: &dyn CiTest,
    cfg: &PruneConfig,
) -> Result<(CausalGraph, Vec<EdgeScore>), RefineError> {
    if !(0.0..=1.0).contains(&cfg.remove_fraction) {
        return Err(RefineError::Config(format!(
            "remove fraction must be in [0, 1], got {}",
            cfg.remove_fraction
        )));
    }
    require_dag(g)?;
    let cols = column_map(g, test)?;
    let edges: Vec<(usize, usize)> = g.directed_edges().collect();
    let scored: Vec<Result<EdgeScore, RefineError>> = edges
        .par_iter()
        .map(|&(x, y)| {
            let mut without = g.clone();
            without.remove_pair(x, y);
            let witness = minimal_separator(&without, x, y)?.unwrap_or_default();
            let p_value = run_test(test, &cols, g, x, y, &witness)?;
            Ok(EdgeScore {
                edge: (x, y),
                witness,
                p_value,
            })
        })
        .collect();
    let mut scores = scored.into_iter().collect::<Result<Vec<_>, _>>()?;
    match cfg.order {
        PruneOrder::HighestPFirst => scores.sort_by(|a, b| b.p_value.total_cmp(&a.p_value)),
        PruneOrder::LowestPFirst => scores.sort_by(|a, b| a.p_value.total_cmp(&b.p_value)),
    }
    let k = removal_count(cfg.remove_fraction, edges.len());
    let mut out = g.clone();
    for s in &scores[..k] {
        out.remove_pair(s.edge.0, s.edge.1);
    }
    Ok((out, scores))
}

/// Tests every non-adjacent pair given its minimal separator and adds the
/// dependent ones (`p < alpha`) in ascending p order, directed by `resolver`
/// unless that direction would close a cycle.
/// Returns the grown graph and the scores of the added edges.
pub fn expand_edges(
    g: &CausalGraph,
    test: &dyn CiTest,
    alpha: f64,
    resolver: &DirectionResolver,
) -> Result<(CausalGraph, Vec<EdgeScore>), RefineError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RefineError::Config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    require_dag(g)?;
    let cols = column_map(g, test)?;
    let n = g.n_nodes();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .filter(|&(a, b)| !g.is_adjacent(a, b))
        .collect();
    let scored: Vec<Result<EdgeScore, RefineError>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let witness = minimal_separator(g, a, b)?.unwrap_or_default();
            let p_value = run_test(test, &cols, g, a, b, &witness)?;
            Ok(EdgeScore {
                edge: (a, b),
                witness,
                p_value,
            })
        })
        .collect();
    let mut candidates: Vec<EdgeScore> = scored
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|s| s.p_value < alpha)
        .collect();
    candidates.sort_by(|a, b| a.p_value.total_cmp(&b.p_value));
    let mut out = g.clone();
    let mut added = Vec::with_capacity(candidates.len());
    for mut c in candidates {
        let (mut u, mut v) = resolver.choose(&out, c.edge.0, c.edge.1);
        if out.has_directed_path(v, u) {
            // a prior direction that would close a cycle gives way
            (u, v) = (v, u);
        }
        out.add_directed(u, v)?;
        c.edge = (u, v);
        added.push(c);
    }
    Ok((out, added))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, directed: &[(usize, usize)], undirected: &[(usize, usize)]) -> CausalGraph {
        let names: Vec<String> = (0..n).map(|i| ((b'A' + i as u8) as char).to_string()).collect();
        let mut g = CausalGraph::with_nodes(&names).unwrap();
        for &(u, v) in directed {
            g.add_directed(u, v).unwrap();
        }
        for &(u, v) in undirected {
            g.add_undirected(u, v).unwrap();
        }
        g
    }

    #[test]
    fn two_cycle_keeps_forward_edge() {
        let g = graph(2, &[(0, 1), (1, 0)], &[]);
        let out = enforce_acyclicity(&g, &DirectionResolver::default());
        assert_eq!(out, graph(2, &[(0, 1)], &[]));
    }

    #[test]
    fn dag_is_unchanged() {
        let g = graph(4, &[(0, 1), (1, 2), (0, 3)], &[]);
        assert_eq!(enforce_acyclicity(&g, &DirectionResolver::default()), g);
    }

    #[test]
    fn resolver_priority() {
        // C -> A -> B exists, so the undirected B -- C must become C -> B
        let g = graph(3, &[(2, 0), (0, 1)], &[(1, 2)]);
        let out = enforce_acyclicity(&g, &DirectionResolver::default());
        assert!(out.has_directed(2, 1));
        let prior = DirectionResolver::new([(1, 2)]);
        let out = enforce_acyclicity(&g, &prior);
        assert!(out.is_dag().unwrap());
        assert!(out.has_directed(1, 2), "prior direction is kept; the cycle is broken elsewhere");
        let free = graph(2, &[], &[(0, 1)]);
        assert!(enforce_acyclicity(&free, &DirectionResolver::default()).has_directed(0, 1));
    }

    #[test]
    fn shared_edge_is_removed_first() {
        // two cycles A->B->C->A and A->B->D->A share A->B
        let g = graph(4, &[(0, 1), (1, 2), (1, 3), (2, 0), (3, 0)], &[]);
        let out = enforce_acyclicity(&g, &DirectionResolver::default());
        assert!(!out.has_directed(0, 1));
        assert_eq!(out.n_edges(), 4);
    }

    #[test]
    fn removal_counts() {
        assert_eq!(removal_count(0.0, 19), 0);
        assert_eq!(removal_count(0.05, 19), 1);
        assert_eq!(removal_count(0.10, 30), 3);
        assert_eq!(removal_count(0.25, 19), 5);
        assert_eq!(removal_count(0.5, 19), 10);
        assert_eq!(removal_count(1.0, 19), 19);
    }

    #[test]
    fn cycle_enumeration() {
        let succ = vec![vec![1], vec![2, 0], vec![0]];
        let c = simple_cycles(&succ, 100);
        assert_eq!(c.len(), 2);
        assert_eq!(simple_cycles(&succ, 1).len(), 1);
    }
}
