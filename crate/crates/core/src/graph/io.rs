//! Graph documents.
//!
//! ```text
//! {
//!   "name": "asia",
//!   "nodes": [
//!     {"name": "smoke", "description": "smoking habit"},
//!     {"name": "lung"}
//!   ],
//!   "edges": [
//!     ["smoke", "lung"]
//!   ],
//!   "undirected_edges": [],
//!   "forbidden_edges": []
//! }
//! ```
//!
//! `edges` are directed. `undirected_edges` and `forbidden_edges` are
//! optional and omitted when empty. [`GraphFile::to_json`] emits one node or
//! edge per line in index order, so a canonical document survives
//! parse/serialize byte for byte.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

use super::{CausalGraph, GraphError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphFile {
    pub name: String,
    pub graph: CausalGraph,
    /// Directed pairs asserted absent.
    pub forbidden: BTreeSet<(usize, usize)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    name: String,
    #[serde(default)]
    description: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    name: String,
    nodes: Vec<RawNode>,
    #[serde(default)]
    edges: Vec<[String; 2]>,
    #[serde(default)]
    undirected_edges: Vec<[String; 2]>,
    #[serde(default)]
    forbidden_edges: Vec<[String; 2]>,
}

impl GraphFile {
    pub fn new(name: impl Into<String>, graph: CausalGraph) -> Self {
        Self {
            name: name.into(),
            graph,
            forbidden: BTreeSet::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawDoc =
            serde_json::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))?;
        let mut graph = CausalGraph::new();
        for node in raw.nodes {
            graph.add_node(&node.name, node.description)?;
        }
        for [u, v] in &raw.edges {
            let (u, v) = (graph.node_index(u)?, graph.node_index(v)?);
            graph.add_directed(u, v)?;
        }
        for [u, v] in &raw.undirected_edges {
            let (u, v) = (graph.node_index(u)?, graph.node_index(v)?);
            graph.add_undirected(u, v)?;
        }
        let mut forbidden = BTreeSet::new();
        for [u, v] in &raw.forbidden_edges {
            let (iu, iv) = (graph.node_index(u)?, graph.node_index(v)?);
            if iu == iv {
                return Err(GraphError::SelfLoop(graph.name(iu).to_string()));
            }
            if graph.has_directed(iu, iv) {
                return Err(GraphError::Parse(format!(
                    "edge `{u}` -> `{v}` is both present and forbidden"
                )));
            }
            forbidden.insert((iu, iv));
        }
        Ok(Self {
            name: raw.name,
            graph,
            forbidden,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GraphError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn to_json(&self) -> String {
        let q = |s: &str| serde_json::to_string(s).expect("strings always serialize");
        let g = &self.graph;
        let mut out = String::from("{\n");
        out.push_str(&format!("  \"name\": {},\n", q(&self.name)));

        let nodes: Vec<String> = g
            .nodes()
            .iter()
            .map(|n| match &n.description {
                Some(d) => format!("{{\"name\": {}, \"description\": {}}}", q(&n.name), q(d)),
                None => format!("{{\"name\": {}}}", q(&n.name)),
            })
            .collect();
        push_array(&mut out, "nodes", &nodes);

        let pair = |&(u, v): &(usize, usize)| format!("[{}, {}]", q(g.name(u)), q(g.name(v)));
        let edges: Vec<String> = g.directed.iter().map(pair).collect();
        let mut sections = vec![("edges", edges)];
        if g.n_undirected() > 0 {
            sections.push(("undirected_edges", g.undirected.iter().map(pair).collect()));
        }
        if !self.forbidden.is_empty() {
            sections.push(("forbidden_edges", self.forbidden.iter().map(pair).collect()));
        }
        for (key, items) in sections {
            out.push_str(",\n");
            push_array(&mut out, key, &items);
        }
        out.push_str("\n}\n");
        out
    }
}

fn push_array(out: &mut String, key: &str, items: &[String]) {
    if items.is_empty() {
        out.push_str(&format!("  \"{key}\": []"));
        return;
    }
    out.push_str(&format!("  \"{key}\": [\n"));
    out.push_str(
        &items
            .iter()
            .map(|s| format!("    {s}"))
            .collect::<Vec<_>>()
            .join(",\n"),
    );
    out.push_str("\n  ]");
}
