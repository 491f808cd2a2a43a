//! Causal graph data model shared by every pipeline stage.
//!
//! A [`CausalGraph`] holds an ordered list of named nodes plus two edge sets:
//! directed edges `(src, dst)` and undirected edges stored as `(min, max)`
//! index pairs. Mixed graphs are first-class so PC intermediates, CPDAGs and
//! DAGs all share one type. Structural algorithms live in submodules.

mod dsep;
pub mod io;
pub(crate) mod meek;
mod stats;

use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;

pub use dsep::{ancestors_of, d_separated, minimal_separator};
pub use io::GraphFile;
pub use meek::cpdag_of;
pub use stats::{graph_stats, GraphStats};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("conflicting edges between `{0}` and `{1}`")]
    EdgeConflict(String, String),
    #[error("operation requires a directed graph but found undirected edge `{0}` -- `{1}`")]
    Undirected(String, String),
    #[error("graph contains a directed cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("invalid graph document: {0}")]
    Parse(String),
    #[error("node index {0} out of range")]
    BadIndex(usize),
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub description: Option<String>,
}

/// Canonical node name: surrounding whitespace trimmed, case preserved.
pub fn normalize_name(name: &str) -> String {
    name.trim().to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CausalGraph {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    directed: BTreeSet<(usize, usize)>,
    undirected: BTreeSet<(usize, usize)>,
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl CausalGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an edgeless graph over the given node names.
    pub fn with_nodes<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut g = Self::new();
        for name in names {
            g.add_node(name.as_ref(), None)?;
        }
        Ok(g)
    }

    /// Same node list as `self`, no edges.
    pub fn empty_like(&self) -> Self {
        Self {
            nodes: self.nodes.clone(),
            index: self.index.clone(),
            directed: BTreeSet::new(),
            undirected: BTreeSet::new(),
        }
    }

    pub fn add_node(&mut self, name: &str, description: Option<String>) -> Result<usize> {
        let name = normalize_name(name);
        if name.is_empty() {
            return Err(GraphError::Parse("empty node name".into()));
        }
        if self.index.contains_key(&name) {
            return Err(GraphError::DuplicateNode(name));
        }
        let id = self.nodes.len();
        self.index.insert(name.clone(), id);
        self.nodes.push(Node { name, description });
        Ok(id)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn names(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.name.clone()).collect()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.nodes[i].name
    }

    pub fn node_index(&self, name: &str) -> Result<usize> {
        let key = normalize_name(name);
        self.index
            .get(&key)
            .copied()
            .ok_or(GraphError::UnknownNode(key))
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.nodes.len() {
            Ok(())
        } else {
            Err(GraphError::BadIndex(i))
        }
    }

    fn check_pair(&self, u: usize, v: usize) -> Result<()> {
        self.check(u)?;
        self.check(v)?;
        if u == v {
            return Err(GraphError::SelfLoop(self.name(u).to_string()));
        }
        Ok(())
    }

    /// Adds `u -> v`. Re-adding the same edge is a no-op and `v -> u` may
    /// coexist with it; an undirected edge on the pair is a conflict.
    pub fn add_directed(&mut self, u: usize, v: usize) -> Result<()> {
        self.check_pair(u, v)?;
        if self.directed.contains(&(u, v)) {
            return Ok(());
        }
        if self.undirected.contains(&ordered(u, v)) {
            return Err(GraphError::EdgeConflict(
                self.name(u).to_string(),
                self.name(v).to_string(),
            ));
        }
        self.directed.insert((u, v));
        Ok(())
    }

    pub fn add_undirected(&mut self, u: usize, v: usize) -> Result<()> {
        self.check_pair(u, v)?;
        let key = ordered(u, v);
        if self.undirected.contains(&key) {
            return Ok(());
        }
        if self.is_adjacent(u, v) {
            return Err(GraphError::EdgeConflict(
                self.name(u).to_string(),
                self.name(v).to_string(),
            ));
        }
        self.undirected.insert(key);
        Ok(())
    }

    pub fn add_directed_by_name(&mut self, u: &str, v: &str) -> Result<()> {
        let (u, v) = (self.node_index(u)?, self.node_index(v)?);
        self.add_directed(u, v)
    }

    /// Replaces whatever joins `u` and `v` with `u -> v`.
    pub fn set_directed(&mut self, u: usize, v: usize) -> Result<()> {
        self.check_pair(u, v)?;
        self.remove_pair(u, v);
        self.directed.insert((u, v));
        Ok(())
    }

    /// Removes any edge between `u` and `v`; returns whether one existed.
    pub fn remove_pair(&mut self, u: usize, v: usize) -> bool {
        let a = self.directed.remove(&(u, v));
        let b = self.directed.remove(&(v, u));
        let c = self.undirected.remove(&ordered(u, v));
        a || b || c
    }

    /// Removes only `u -> v`; returns whether it existed.
    pub fn remove_directed(&mut self, u: usize, v: usize) -> bool {
        self.directed.remove(&(u, v))
    }

    pub fn has_directed(&self, u: usize, v: usize) -> bool {
        self.directed.contains(&(u, v))
    }

    pub fn has_undirected(&self, u: usize, v: usize) -> bool {
        self.undirected.contains(&ordered(u, v))
    }

    pub fn is_adjacent(&self, u: usize, v: usize) -> bool {
        self.has_directed(u, v) || self.has_directed(v, u) || self.has_undirected(u, v)
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.directed.iter().copied()
    }

    pub fn undirected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.undirected.iter().copied()
    }

    pub fn n_directed(&self) -> usize {
        self.directed.len()
    }

    pub fn n_undirected(&self) -> usize {
        self.undirected.len()
    }

    pub fn n_edges(&self) -> usize {
        self.directed.len() + self.undirected.len()
    }

    /// Adjacent unordered pairs as `(min, max)`.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.directed
            .iter()
            .map(|&(u, v)| ordered(u, v))
            .chain(self.undirected.iter().copied())
            .collect()
    }

    pub fn parents(&self, v: usize) -> Vec<usize> {
        self.directed
            .iter()
            .filter(|&&(_, d)| d == v)
            .map(|&(s, _)| s)
            .collect()
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        self.directed
            .range((v, 0)..(v + 1, 0))
            .map(|&(_, d)| d)
            .collect()
    }

    /// Nodes joined to `v` by an undirected edge.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .undirected
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// All nodes adjacent to `v` by any edge kind, ascending.
    pub fn adjacent(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .skeleton()
            .into_iter()
            .filter_map(|(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Parent lists and child lists for every node, built in one pass.
    pub(crate) fn directed_adjacency(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let n = self.n_nodes();
        let mut pa = vec![Vec::new(); n];
        let mut ch = vec![Vec::new(); n];
        for &(u, v) in &self.directed {
            pa[v].push(u);
            ch[u].push(v);
        }
        (pa, ch)
    }

    fn require_directed(&self) -> Result<()> {
        if let Some(&(a, b)) = self.undirected.iter().next() {
            return Err(GraphError::Undirected(
                self.name(a).to_string(),
                self.name(b).to_string(),
            ));
        }
        Ok(())
    }

    /// Whether the directed edges admit a topological order. Rejects graphs
    /// carrying undirected edges.
    pub fn is_dag(&self) -> Result<bool> {
        self.require_directed()?;
        Ok(self.kahn().len() == self.n_nodes())
    }

    /// Acyclicity of the directed part alone, ignoring undirected edges.
    pub fn directed_part_is_acyclic(&self) -> bool {
        self.kahn().len() == self.n_nodes()
    }

    fn kahn(&self) -> Vec<usize> {
        let n = self.n_nodes();
        let (_, ch) = self.directed_adjacency();
        let mut indeg = vec![0usize; n];
        for &(_, v) in &self.directed {
            indeg[v] += 1;
        }
        let mut heap: BinaryHeap<Reverse<usize>> =
            (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(u)) = heap.pop() {
            order.push(u);
            for &v in &ch[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    heap.push(Reverse(v));
                }
            }
        }
        order
    }

    /// Topological order of node indices; ties go to the lowest index.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        self.require_directed()?;
        let order = self.kahn();
        if order.len() == self.n_nodes() {
            return Ok(order);
        }
        let cycle = self
            .find_cycle()
            .expect("kahn stalled so a cycle exists");
        Err(GraphError::Cycle(
            cycle.iter().map(|&i| self.name(i).to_string()).collect(),
        ))
    }

    /// One directed cycle, as a node sequence whose last element points back
    /// to the first, or `None` for an acyclic directed part.
    pub fn find_cycle(&self) -> Option<Vec<usize>> {
        let n = self.n_nodes();
        let (_, ch) = self.directed_adjacency();
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; n];
        let mut stack: Vec<usize> = Vec::new();
        for root in 0..n {
            if state[root] != 0 {
                continue;
            }
            let mut frames: Vec<(usize, usize)> = vec![(root, 0)];
            state[root] = 1;
            stack.push(root);
            while let Some(top) = frames.last_mut() {
                let u = top.0;
                if top.1 < ch[u].len() {
                    let v = ch[u][top.1];
                    top.1 += 1;
                    match state[v] {
                        0 => {
                            state[v] = 1;
                            stack.push(v);
                            frames.push((v, 0));
                        }
                        1 => {
                            let pos = stack.iter().position(|&w| w == v).unwrap();
                            return Some(stack[pos..].to_vec());
                        }
                        _ => {}
                    }
                } else {
                    state[u] = 2;
                    stack.pop();
                    frames.pop();
                }
            }
        }
        None
    }

    /// Whether a directed path `from ~> to` exists (length ≥ 0).
    pub fn has_directed_path(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let (_, ch) = self.directed_adjacency();
        let mut seen = vec![false; self.n_nodes()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(u) = stack.pop() {
            for &v in &ch[u] {
                if v == to {
                    return true;
                }
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        false
    }

    /// Directed edges by name, for comparing graphs whose node orders differ.
    pub fn named_directed_edges(&self) -> BTreeSet<(String, String)> {
        self.directed
            .iter()
            .map(|&(u, v)| (self.name(u).to_string(), self.name(v).to_string()))
            .collect()
    }

    pub fn named_undirected_edges(&self) -> BTreeSet<(String, String)> {
        self.undirected
            .iter()
            .map(|&(u, v)| {
                let (a, b) = (self.name(u).to_string(), self.name(v).to_string());
                if a <= b {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .collect()
    }

    /// Unshielded colliders `a -> b <- c` with `a < c`, as `(a, b, c)`.
    pub fn v_structures(&self) -> BTreeSet<(usize, usize, usize)> {
        let (pa, _) = self.directed_adjacency();
        let mut out = BTreeSet::new();
        for (b, parents) in pa.iter().enumerate() {
            for (i, &a) in parents.iter().enumerate() {
                for &c in &parents[i + 1..] {
                    if !self.is_adjacent(a, c) {
                        let (a, c) = ordered(a, c);
                        out.insert((a, b, c));
                    }
                }
            }
        }
        out
    }
}
