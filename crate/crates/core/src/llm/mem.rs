//! Memorization probes: reveal part of a known graph, ask for the rest and
//! score the reconstruction of the hidden part.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::parse::{parse_edge_list, parse_node_list, parse_nodes_and_edges};
use super::template::{edge_list, fill, node_list, M1, M2, M3};
use crate::graph::CausalGraph;
use crate::scm::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MemKind {
    /// Reveal nodes, predict the remaining nodes.
    M1,
    /// Reveal all nodes and some edges, predict the remaining edges.
    M2,
    /// Reveal some nodes and edges, predict the remaining of both.
    M3,
}

impl FromStr for MemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "M1" => Ok(MemKind::M1),
            "M2" => Ok(MemKind::M2),
            "M3" => Ok(MemKind::M3),
            _ => Err(format!("unknown memorization task `{s}` (expected M1, M2 or M3)")),
        }
    }
}

impl fmt::Display for MemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

pub type NamedEdge = (String, String);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemTask {
    pub kind: MemKind,
    pub dataset_name: String,
    pub reveal_fraction: f64,
    pub seed: u64,
    pub all_nodes: Vec<String>,
    pub revealed_nodes: Vec<String>,
    pub hidden_nodes: Vec<String>,
    pub revealed_edges: Vec<NamedEdge>,
    pub hidden_edges: Vec<NamedEdge>,
}

/// `round(fraction * total)` with halves rounded up.
pub fn reveal_count(fraction: f64, total: usize) -> usize {
    ((fraction * total as f64 + 0.5 + 1e-9).floor() as usize).min(total)
}

/// Seeded split of `items` into (revealed, hidden), both in input order.
fn split<T: Clone>(items: &[T], fraction: f64, seed: u64, tag: u64) -> (Vec<T>, Vec<T>) {
    let k = reveal_count(fraction, items.len());
    let mut idx: Vec<usize> = (0..items.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, tag]));
    idx.shuffle(&mut rng);
    let chosen: BTreeSet<usize> = idx[..k].iter().copied().collect();
    let mut revealed = Vec::with_capacity(k);
    let mut hidden = Vec::with_capacity(items.len() - k);
    for (i, item) in items.iter().enumerate() {
        if chosen.contains(&i) {
            revealed.push(item.clone());
        } else {
            hidden.push(item.clone());
        }
    }
    (revealed, hidden)
}

/// Builds a task from a known graph. Fractions outside `[0, 1]` are clamped.
pub fn split_for_mem(
    g: &CausalGraph,
    dataset_name: &str,
    kind: MemKind,
    fraction: f64,
    seed: u64,
) -> MemTask {
    let fraction = fraction.clamp(0.0, 1.0);
    let all_nodes = g.names();
    let mut edges: Vec<NamedEdge> = g
        .directed_edges()
        .map(|(u, v)| (g.name(u).to_string(), g.name(v).to_string()))
        .collect();
    edges.extend(
        g.undirected_edges()
            .map(|(u, v)| (g.name(u).to_string(), g.name(v).to_string())),
    );
    let (revealed_nodes, hidden_nodes) = match kind {
        MemKind::M1 | MemKind::M3 => split(&all_nodes, fraction, seed, 1),
        MemKind::M2 => (Vec::new(), Vec::new()),
    };
    let (revealed_edges, hidden_edges) = match kind {
        MemKind::M2 | MemKind::M3 => split(&edges, fraction, seed, 2),
        MemKind::M1 => (Vec::new(), Vec::new()),
    };
    MemTask {
        kind,
        dataset_name: dataset_name.to_string(),
        reveal_fraction: fraction,
        seed,
        all_nodes,
        revealed_nodes,
        hidden_nodes,
        revealed_edges,
        hidden_edges,
    }
}

pub fn render_mem_prompt(task: &MemTask) -> String {
    let nodes = node_list(&task.revealed_nodes);
    let all = node_list(&task.all_nodes);
    let edges = edge_list(&task.revealed_edges);
    match task.kind {
        MemKind::M1 => fill(M1, &[("dataset_name", &task.dataset_name), ("given_nodes", &nodes)]),
        MemKind::M2 => fill(
            M2,
            &[("dataset_name", &task.dataset_name), ("all_nodes", &all), ("given_edges", &edges)],
        ),
        MemKind::M3 => fill(
            M3,
            &[("dataset_name", &task.dataset_name), ("given_nodes", &nodes), ("given_edges", &edges)],
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum ParseStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorResponse {
    pub raw: String,
    pub nodes: Option<Vec<String>>,
    pub edges: Option<Vec<NamedEdge>>,
    pub status: ParseStatus,
}

impl PriorResponse {
    pub fn parsed(&self) -> bool {
        self.status == ParseStatus::Ok
    }
}

/// Parses a response in the format the task's prompt asks for.
pub fn parse_mem_response(kind: MemKind, raw: &str) -> PriorResponse {
    let (nodes, edges, status) = match kind {
        MemKind::M1 => match parse_node_list(raw) {
            Ok(n) => (Some(n), None, ParseStatus::Ok),
            Err(e) => (None, None, ParseStatus::Failed(e)),
        },
        MemKind::M2 => match parse_edge_list(raw) {
            Ok(e) => (None, Some(e), ParseStatus::Ok),
            Err(e) => (None, None, ParseStatus::Failed(e)),
        },
        MemKind::M3 => match parse_nodes_and_edges(raw) {
            Ok((n, e)) => (Some(n), Some(e), ParseStatus::Ok),
            Err(e) => (None, None, ParseStatus::Failed(e)),
        },
    };
    PriorResponse {
        raw: raw.to_string(),
        nodes,
        edges,
        status,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    const ZERO: Prf = Prf {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    /// Set comparison; two empty sets agree perfectly.
    fn of<T: Ord>(pred: &BTreeSet<T>, truth: &BTreeSet<T>) -> Prf {
        if pred.is_empty() && truth.is_empty() {
            return Prf {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
            };
        }
        let tp = pred.intersection(truth).count() as f64;
        let p = if pred.is_empty() { 0.0 } else { tp / pred.len() as f64 };
        let r = if truth.is_empty() { 0.0 } else { tp / truth.len() as f64 };
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        Prf {
            precision: p,
            recall: r,
            f1,
        }
    }
}

/// Node and edge scores; `None` for parts the task does not ask for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemScore {
    pub nodes: Option<Prf>,
    pub edges: Option<Prf>,
}

fn key(name: &str) -> String {
    name.trim().to_lowercase()
}

fn node_set<S: AsRef<str>>(names: &[S]) -> BTreeSet<String> {
    names.iter().map(|n| key(n.as_ref())).collect()
}

fn edge_set(edges: &[NamedEdge]) -> BTreeSet<(String, String)> {
    edges.iter().map(|(u, v)| (key(u), key(v))).collect()
}

/// Scores predictions against the hidden items. A failed parse scores 0.
pub fn score_mem(response: &PriorResponse, task: &MemTask) -> MemScore {
    let wants_nodes = matches!(task.kind, MemKind::M1 | MemKind::M3);
    let wants_edges = matches!(task.kind, MemKind::M2 | MemKind::M3);
    let ok = response.parsed();
    let nodes = wants_nodes.then(|| match (&response.nodes, ok) {
        (Some(p), true) => Prf::of(&node_set(p), &node_set(&task.hidden_nodes)),
        _ => Prf::ZERO,
    });
    let edges = wants_edges.then(|| match (&response.edges, ok) {
        (Some(p), true) => Prf::of(&edge_set(p), &edge_set(&task.hidden_edges)),
        _ => Prf::ZERO,
    });
    MemScore { nodes, edges }
}
