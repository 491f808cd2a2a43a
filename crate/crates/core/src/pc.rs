//! The PC algorithm with background knowledge.
//!
//! Skeleton search starts from the complete graph minus excluded pairs and
//! removes edges level by level. Removal decisions at each level are made
//! against the adjacency snapshot taken when the level starts, so the CI
//! tests of one level can run in parallel without affecting the result.
//!
//! Required edges are never removed and their prior direction is applied
//! before Meek propagation. A pair is excluded from the skeleton when both
//! directions are forbidden, or one direction is forbidden and the reverse
//! is not required.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ci::{CiError, CiTest, TestKind};
use crate::graph::meek::Marks;
use crate::graph::{CausalGraph, GraphError, GraphFile};

#[derive(Debug, Error)]
pub enum PcError {
    #[error("CI test failed for ({x}, {y} | {cond:?}): {source}")]
    Ci {
        x: String,
        y: String,
        cond: Vec<String>,
        #[source]
        source: CiError,
    },
    #[error("invalid prior: {0}")]
    Prior(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Required and forbidden directed edges over variable indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PriorKnowledge {
    required: BTreeSet<(usize, usize)>,
    forbidden: BTreeSet<(usize, usize)>,
}

impl PriorKnowledge {
    pub fn new(
        required: impl IntoIterator<Item = (usize, usize)>,
        forbidden: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, PcError> {
        let required: BTreeSet<_> = required.into_iter().collect();
        let forbidden: BTreeSet<_> = forbidden.into_iter().collect();
        if let Some(&(u, _)) = required.iter().chain(&forbidden).find(|(u, v)| u == v) {
            return Err(PcError::Prior(format!("self-loop on variable {u}")));
        }
        if let Some(&(u, v)) = required.intersection(&forbidden).next() {
            return Err(PcError::Prior(format!("edge {u} -> {v} is both required and forbidden")));
        }
        Ok(Self { required, forbidden })
    }

    /// Maps named edges onto `vars`; every endpoint must be a variable.
    pub fn from_names(
        vars: &[String],
        required: &[(String, String)],
        forbidden: &[(String, String)],
    ) -> Result<Self, PcError> {
        let index = |name: &str| {
            let name = crate::graph::normalize_name(name);
            vars.iter()
                .position(|v| *v == name)
                .ok_or_else(|| PcError::Prior(format!("prior mentions unknown variable `{name}`")))
        };
        let map = |edges: &[(String, String)]| {
            edges
                .iter()
                .map(|(u, v)| Ok((index(u)?, index(v)?)))
                .collect::<Result<Vec<_>, PcError>>()
        };
        Self::new(map(required)?, map(forbidden)?)
    }

    /// Directed edges of the file are required, its forbidden list forbidden.
    pub fn from_graph_file(file: &GraphFile, vars: &[String]) -> Result<Self, PcError> {
        let g = &file.graph;
        if g.n_undirected() > 0 {
            return Err(PcError::Prior("prior graphs must not contain undirected edges".into()));
        }
        let named = |edges: &mut dyn Iterator<Item = (usize, usize)>| {
            edges
                .map(|(u, v)| (g.name(u).to_string(), g.name(v).to_string()))
                .collect::<Vec<_>>()
        };
        let required = named(&mut g.directed_edges());
        let forbidden = named(&mut file.forbidden.iter().copied());
        Self::from_names(vars, &required, &forbidden)
    }

    /// Directed edges of `g` as required edges.
    pub fn from_graph(g: &CausalGraph) -> Self {
        Self {
            required: g.directed_edges().collect(),
            forbidden: BTreeSet::new(),
        }
    }

    pub fn required(&self) -> &BTreeSet<(usize, usize)> {
        &self.required
    }

    pub fn forbidden(&self) -> &BTreeSet<(usize, usize)> {
        &self.forbidden
    }

    pub fn is_empty(&self) -> bool {
        self.required.is_empty() && self.forbidden.is_empty()
    }

    /// Forbids both directions of every pair not covered by a required edge.
    pub fn forbid_non_prior(mut self, n_vars: usize) -> Self {
        for a in 0..n_vars {
            for b in 0..n_vars {
                if a != b && !self.is_protected(a, b) {
                    self.forbidden.insert((a, b));
                }
            }
        }
        self
    }

    /// A required edge joins the pair in some direction.
    pub fn is_protected(&self, a: usize, b: usize) -> bool {
        self.required.contains(&(a, b)) || self.required.contains(&(b, a))
    }

    /// The pair may not be adjacent.
    pub fn is_excluded(&self, a: usize, b: usize) -> bool {
        let fab = self.forbidden.contains(&(a, b));
        let fba = self.forbidden.contains(&(b, a));
        (fab && fba)
            || (fab && !self.required.contains(&(b, a)))
            || (fba && !self.required.contains(&(a, b)))
    }

    fn max_index(&self) -> Option<usize> {
        self.required
            .iter()
            .chain(&self.forbidden)
            .map(|&(u, v)| u.max(v))
            .max()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcConfig {
    pub alpha: f64,
    /// `None` searches conditioning sets of every size.
    pub max_cond_size: Option<usize>,
}

impl Default for PcConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            max_cond_size: Some(3),
        }
    }
}

impl PcConfig {
    /// Defaults for a test kind: unlimited depth for the oracle, 3 otherwise.
    pub fn for_test(kind: TestKind) -> Self {
        Self {
            alpha: 0.05,
            max_cond_size: match kind {
                TestKind::DSepOracle => None,
                _ => Some(3),
            },
        }
    }

    fn validate(&self) -> Result<(), PcError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(PcError::Config(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Separating sets keyed by the ordered pair `(min, max)`.
pub type SepSetMap = BTreeMap<(usize, usize), Vec<usize>>;

/// An orientation that lost to an earlier or higher-priority one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrientationConflict {
    pub stage: ConflictStage,
    pub kept: (String, String),
    pub rejected: (String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictStage {
    VStructure,
    Prior,
}

#[derive(Debug, Clone)]
pub struct Skeleton {
    pub graph: CausalGraph,
    /// Sepsets of pairs removed by testing.
    pub sepsets: SepSetMap,
    /// Excluded pairs, with a separating set on the final skeleton when one
    /// was found. Used only to orient colliders around those pairs.
    pub excluded: BTreeMap<(usize, usize), Option<Vec<usize>>>,
}

#[derive(Debug, Clone)]
pub struct PcOutput {
    pub graph: CausalGraph,
    pub skeleton: Skeleton,
    pub conflicts: Vec<OrientationConflict>,
}

/// Calls `f` on each `k`-subset of `items` in lexicographic order until it
/// returns `Some`.
fn find_subset<T>(
    items: &[usize],
    k: usize,
    mut f: impl FnMut(&[usize]) -> Option<T>,
) -> Option<T> {
    if k > items.len() {
        return None;
    }
    let m = items.len();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf = vec![0; k];
    'next: loop {
        for (b, &i) in buf.iter_mut().zip(&idx) {
            *b = items[i];
        }
        if let Some(t) = f(&buf) {
            return Some(t);
        }
        let mut i = k;
        while i > 0 {
            i -= 1;
            if idx[i] < i + m - k {
                idx[i] += 1;
                for j in (i + 1)..k {
                    idx[j] = idx[j - 1] + 1;
                }
                continue 'next;
            }
        }
        return None;
    }
}

fn ci_error(test: &dyn CiTest, x: usize, y: usize, s: &[usize], source: CiError) -> PcError {
    let names = test.variables();
    PcError::Ci {
        x: names[x].clone(),
        y: names[y].clone(),
        cond: s.iter().map(|&v| names[v].clone()).collect(),
        source,
    }
}

/// First size-`level` subset of `adj(x)\{y}`, then of `adj(y)\{x}`, that
/// separates `x` and `y` at level `alpha`.
fn search_sepset(
    test: &dyn CiTest,
    alpha: f64,
    adj: &[BTreeSet<usize>],
    x: usize,
    y: usize,
    level: usize,
) -> Result<Option<Vec<usize>>, PcError> {
    let ax: Vec<usize> = adj[x].iter().copied().filter(|&v| v != y).collect();
    let ay: Vec<usize> = adj[y].iter().copied().filter(|&v| v != x).collect();
    let mut tried: BTreeSet<Vec<usize>> = BTreeSet::new();
    for (side, pool) in [ax, ay].iter().enumerate() {
        let found = find_subset(pool, level, |s| {
            if side == 1 && tried.contains(s) {
                return None;
            }
            if side == 0 {
                tried.insert(s.to_vec());
            }
            match test.test(x, y, s) {
                Ok(r) if r.p_value > alpha => Some(Ok(s.to_vec())),
                Ok(_) => None,
                Err(e) => Some(Err(ci_error(test, x, y, s, e))),
            }
        });
        match found {
            Some(Ok(s)) => return Ok(Some(s)),
            Some(Err(e)) => return Err(e),
            None => {}
        }
    }
    Ok(None)
}

/// Level-wise skeleton search.
pub fn pc_skeleton(
    test: &dyn CiTest,
    cfg: &PcConfig,
    prior: &PriorKnowledge,
) -> Result<Skeleton, PcError> {
    cfg.validate()?;
    let names = test.variables().to_vec();
    let n = names.len();
    if let Some(m) = prior.max_index() {
        if m >= n {
            return Err(PcError::Prior(format!("prior refers to variable {m}, only {n} variables")));
        }
    }
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut excluded = BTreeMap::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if prior.is_excluded(a, b) {
                excluded.insert((a, b), None);
            } else {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
    }

    let mut sepsets = SepSetMap::new();
    let mut level = 0;
    loop {
        if cfg.max_cond_size.is_some_and(|m| level > m) {
            break;
        }
        let frozen = adj.clone();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| frozen[a].iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
            .filter(|&(a, b)| !prior.is_protected(a, b))
            .filter(|&(a, b)| frozen[a].len() > level || frozen[b].len() > level)
            .collect();
        if pairs.is_empty() {
            break;
        }
        let results: Vec<Result<Option<Vec<usize>>, PcError>> = pairs
            .par_iter()
            .map(|&(a, b)| search_sepset(test, cfg.alpha, &frozen, a, b, level))
            .collect();
        for (&(a, b), res) in pairs.iter().zip(results) {
            if let Some(s) = res? {
                adj[a].remove(&b);
                adj[b].remove(&a);
                sepsets.insert((a, b), s);
            }
        }
        level += 1;
    }

    // separating sets for excluded pairs, searched on the final skeleton
    let keys: Vec<(usize, usize)> = excluded.keys().copied().collect();
    let found: Vec<Result<Option<Vec<usize>>, PcError>> = keys
        .par_iter()
        .map(|&(a, b)| {
            let depth = adj[a].len().max(adj[b].len());
            let depth = cfg.max_cond_size.map_or(depth, |m| m.min(depth));
            for l in 0..=depth {
                if let Some(s) = search_sepset(test, cfg.alpha, &adj, a, b, l)? {
                    return Ok(Some(s));
                }
            }
            Ok(None)
        })
        .collect();
    for (k, res) in keys.into_iter().zip(found) {
        excluded.insert(k, res?);
    }

    let mut graph = CausalGraph::with_nodes(&names)?;
    for (a, nb) in adj.iter().enumerate() {
        for &b in nb.iter().filter(|&&b| b > a) {
            graph.add_undirected(a, b)?;
        }
    }
    Ok(Skeleton {
        graph,
        sepsets,
        excluded,
    })
}

fn named(g: &CausalGraph, (u, v): (usize, usize)) -> (String, String) {
    (g.name(u).to_string(), g.name(v).to_string())
}

/// Orients `x -> z <- y` for every unshielded triple with `z` outside the
/// separating set of `(x, y)`. Triples are visited in lexicographic
/// `(x, y, z)` order and the first orientation of an edge wins.
pub fn orient_v_structures(skel: &Skeleton) -> (CausalGraph, Vec<OrientationConflict>) {
    let mut g = skel.graph.clone();
    let mut conflicts = Vec::new();
    let n = g.n_nodes();
    let sepset = |a: usize, b: usize| -> Option<&Vec<usize>> {
        skel.sepsets
            .get(&(a, b))
            .or_else(|| skel.excluded.get(&(a, b)).and_then(Option::as_ref))
    };
    for x in 0..n {
        for y in (x + 1)..n {
            if skel.graph.is_adjacent(x, y) {
                continue;
            }
            let Some(s) = sepset(x, y) else { continue };
            for z in 0..n {
                if !skel.graph.is_adjacent(x, z) || !skel.graph.is_adjacent(y, z) || s.contains(&z) {
                    continue;
                }
                for u in [x, y] {
                    if g.has_undirected(u, z) {
                        g.set_directed(u, z).expect("adjacent pair");
                    } else if g.has_directed(z, u) {
                        conflicts.push(OrientationConflict {
                            stage: ConflictStage::VStructure,
                            kept: named(&g, (z, u)),
                            rejected: named(&g, (u, z)),
                        });
                    }
                }
            }
        }
    }
    (g, conflicts)
}

/// Directs edges covered by the prior, then applies Meek's rules to closure.
pub fn apply_meek_rules(
    g: &CausalGraph,
    prior: &PriorKnowledge,
) -> (CausalGraph, Vec<OrientationConflict>) {
    let mut g = g.clone();
    let mut conflicts = Vec::new();
    let mut fixed: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &(u, v) in prior.required() {
        if u >= g.n_nodes() || v >= g.n_nodes() || !g.is_adjacent(u, v) {
            continue;
        }
        if g.has_directed(v, u) {
            if fixed.contains(&(v, u)) {
                // both directions required: the first one stays
                conflicts.push(OrientationConflict {
                    stage: ConflictStage::Prior,
                    kept: named(&g, (v, u)),
                    rejected: named(&g, (u, v)),
                });
                continue;
            }
            conflicts.push(OrientationConflict {
                stage: ConflictStage::Prior,
                kept: named(&g, (u, v)),
                rejected: named(&g, (v, u)),
            });
        }
        g.set_directed(u, v).expect("adjacent pair");
        fixed.insert((u, v));
    }
    let mut marks = Marks::from_graph(&g);
    marks.close();
    (marks.write_back(&g), conflicts)
}

/// Skeleton, v-structures, prior orientation and Meek closure.
pub fn discover(
    test: &dyn CiTest,
    cfg: &PcConfig,
    prior: &PriorKnowledge,
) -> Result<PcOutput, PcError> {
    let skeleton = pc_skeleton(test, cfg, prior)?;
    let (g, mut conflicts) = orient_v_structures(&skeleton);
    let (graph, prior_conflicts) = apply_meek_rules(&g, prior);
    conflicts.extend(prior_conflicts);
    Ok(PcOutput {
        graph,
        skeleton,
        conflicts,
    })
}
