#![allow(dead_code)]

use std::path::PathBuf;

use llmpc_core::graph::{CausalGraph, GraphFile};
use llmpc_core::llm::template::{edge_list, node_list};
use llmpc_core::llm::{
    render_expand_prompt, render_mem_prompt, render_pair_prompt, render_roots_prompt, split_for_mem,
    CachedClient, MemKind, MemTask,
};

pub const STUB_MODEL: &str = "stub";
pub const STUB_DATASET: &str = "asia";
pub const STUB_FRACTION: f64 = 0.5;
pub const STUB_SEED: u64 = 0;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn load_graph(file: &str) -> CausalGraph {
    GraphFile::load(repo_root().join("data/graphs").join(file)).unwrap().graph
}

pub fn stub_cache_dir() -> PathBuf {
    repo_root().join("data/stub_cache")
}

pub fn stub_client() -> CachedClient {
    CachedClient::new(None, stub_cache_dir(), STUB_MODEL, 0.0)
}

pub fn mem_task(g: &CausalGraph, kind: MemKind) -> MemTask {
    split_for_mem(g, STUB_DATASET, kind, STUB_FRACTION, STUB_SEED)
}

/// Prompts and the answers of a model that knows `g` exactly.
pub fn stub_entries(g: &CausalGraph) -> Vec<(String, String)> {
    let vars = g.nodes().to_vec();
    let n = vars.len();
    let mut out = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let answer = if g.has_directed(a, b) {
                "A"
            } else if g.has_directed(b, a) {
                "B"
            } else {
                "C"
            };
            out.push((render_pair_prompt(&vars[a], &vars[b]), format!("Answer: {answer}")));
        }
    }
    let roots: Vec<&str> = (0..n).filter(|&v| g.parents(v).is_empty()).map(|v| g.name(v)).collect();
    out.push((render_roots_prompt(&vars), node_list(&roots)));
    for u in 0..n {
        let others: Vec<usize> = (0..n).filter(|&c| c != u).collect();
        let children: Vec<&str> = g.children(u).into_iter().map(|c| g.name(c)).collect();
        out.push((render_expand_prompt(&vars, u, &others), node_list(&children)));
    }
    for kind in [MemKind::M1, MemKind::M2, MemKind::M3] {
        let task = mem_task(g, kind);
        let answer = match kind {
            MemKind::M1 => node_list(&task.hidden_nodes),
            MemKind::M2 => edge_list(&task.hidden_edges),
            MemKind::M3 => format!(
                "{{'remaining_nodes': {}, 'remaining_edges': {}}}",
                node_list(&task.hidden_nodes),
                edge_list(&task.hidden_edges)
            ),
        };
        out.push((render_mem_prompt(&task), answer));
    }
    out
}
