//! Edge-level comparison of a predicted graph against a reference graph.

mod bench;

pub use bench::{bench_matrix, BenchConfig, BenchReport, DatasetSpec, MethodSpec, PriorSource, RunRow};

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{normalize_name, CausalGraph};
use crate::scm::derive_seed;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("node sets differ; symmetric difference: {0:?}")]
    NodeMismatch(Vec<String>),
    #[error("invalid bench config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Input { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Ordered pairs must match; a predicted undirected edge never matches
    /// a directed one.
    #[default]
    DirectedStrict,
    /// Unordered adjacencies.
    Skeleton,
    /// Like strict, but a predicted undirected edge matches either
    /// orientation of the reference edge.
    CpdagAware,
}

impl FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().replace('-', "_").as_str() {
            "directed_strict" | "directed" | "strict" => Ok(MatchMode::DirectedStrict),
            "skeleton" => Ok(MatchMode::Skeleton),
            "cpdag_aware" | "cpdag" => Ok(MatchMode::CpdagAware),
            _ => Err(format!("unknown matching mode `{s}`")),
        }
    }
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::DirectedStrict => "directed_strict",
            MatchMode::Skeleton => "skeleton",
            MatchMode::CpdagAware => "cpdag_aware",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matching_mode: MatchMode,
}

/// `0/0 = 0`.
fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

impl EvalReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, mode: MatchMode) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1: f1_score(precision, recall),
            matching_mode: mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Item {
    Arrow(usize, usize),
    Line(usize, usize),
}

/// Index map from `pred` nodes onto `truth` nodes by name.
fn align(pred: &CausalGraph, truth: &CausalGraph) -> Result<Vec<usize>, EvalError> {
    let p: BTreeSet<String> = pred.names().into_iter().map(|n| normalize_name(&n)).collect();
    let t: BTreeSet<String> = truth.names().into_iter().map(|n| normalize_name(&n)).collect();
    if p != t {
        return Err(EvalError::NodeMismatch(p.symmetric_difference(&t).cloned().collect()));
    }
    Ok(pred
        .names()
        .iter()
        .map(|n| truth.node_index(n).expect("same node sets"))
        .collect())
}

fn items(g: &CausalGraph, map: Option<&[usize]>) -> BTreeSet<Item> {
    let m = |i: usize| map.map_or(i, |m| m[i]);
    let mut out: BTreeSet<Item> = g.directed_edges().map(|(u, v)| Item::Arrow(m(u), m(v))).collect();
    for (u, v) in g.undirected_edges() {
        let (a, b) = (m(u).min(m(v)), m(u).max(m(v)));
        out.insert(Item::Line(a, b));
    }
    out
}

pub fn edge_metrics(pred: &CausalGraph, truth: &CausalGraph, mode: MatchMode) -> Result<EvalReport, EvalError> {
    let map = align(pred, truth)?;
    let p = items(pred, Some(&map));
    let t = items(truth, None);
    let (tp, fp, fn_) = match mode {
        MatchMode::DirectedStrict => {
            let tp = p.intersection(&t).count();
            (tp, p.len() - tp, t.len() - tp)
        }
        MatchMode::Skeleton => {
            let ps = pred_skeleton(&p);
            let ts = pred_skeleton(&t);
            let tp = ps.intersection(&ts).count();
            (tp, ps.len() - tp, ts.len() - tp)
        }
        MatchMode::CpdagAware => {
            let matches = |pi: &Item, ti: &Item| match (*pi, *ti) {
                (Item::Line(a, b), Item::Arrow(u, v)) => (a, b) == (u.min(v), u.max(v)),
                _ => pi == ti,
            };
            let tp = p.iter().filter(|pi| t.iter().any(|ti| matches(pi, ti))).count();
            let covered = t.iter().filter(|ti| p.iter().any(|pi| matches(pi, ti))).count();
            (tp, p.len() - tp, t.len() - covered)
        }
    };
    Ok(EvalReport::from_counts(tp, fp, fn_, mode))
}

fn pred_skeleton(items: &BTreeSet<Item>) -> BTreeSet<(usize, usize)> {
    items
        .iter()
        .map(|i| match *i {
            Item::Arrow(u, v) | Item::Line(u, v) => (u.min(v), u.max(v)),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NegativeComplianceReport {
    pub n_forbidden: usize,
    pub n_violated: usize,
    pub violations: Vec<(String, String)>,
}

/// Forbidden pairs present in `pred`, as `u -> v` or as an undirected
/// `u -- v` that could be read as `u -> v`.
pub fn negative_compliance(pred: &CausalGraph, forbidden: &[(String, String)]) -> NegativeComplianceReport {
    let unique: BTreeSet<(String, String)> = forbidden
        .iter()
        .map(|(u, v)| (normalize_name(u), normalize_name(v)))
        .collect();
    let violations: Vec<(String, String)> = unique
        .iter()
        .filter(|(u, v)| match (pred.node_index(u), pred.node_index(v)) {
            (Ok(a), Ok(b)) => pred.has_directed(a, b) || pred.has_undirected(a, b),
            _ => false,
        })
        .cloned()
        .collect();
    NegativeComplianceReport {
        n_forbidden: unique.len(),
        n_violated: violations.len(),
        violations,
    }
}

/// Replaces `round(fraction * |E|)` randomly chosen edges of `g` by edges on
/// randomly chosen non-adjacent pairs with random direction.
pub fn rewire_edges(g: &CausalGraph, fraction: f64, seed: u64) -> CausalGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0x5245_5749_5245]));
    let mut edges: Vec<(usize, usize)> = g.directed_edges().collect();
    let k = ((fraction.clamp(0.0, 1.0) * edges.len() as f64) + 0.5 + 1e-9).floor() as usize;
    let k = k.min(edges.len());
    edges.shuffle(&mut rng);
    let n = g.n_nodes();
    let mut free: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .filter(|&(a, b)| !g.is_adjacent(a, b))
        .collect();
    free.shuffle(&mut rng);
    let mut out = g.clone();
    for &(u, v) in &edges[..k] {
        out.remove_pair(u, v);
    }
    for &(a, b) in free.iter().take(k) {
        let (u, v) = if rng.random::<bool>() { (a, b) } else { (b, a) };
        out.add_directed(u, v).expect("pair was free");
    }
    out
}
