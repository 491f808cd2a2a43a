//! Causal priors elicited from a chat model: one question per variable pair,
//! or a breadth-first expansion from the likely root causes.

use std::collections::{BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::Serialize;

use super::client::ChatClient;
use super::parse::parse_node_list;
use super::template::{fill, node_list, BFS_EXPAND, BFS_ROOTS, PAIRWISE};
use super::LlmError;
use crate::graph::{CausalGraph, Node};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptFailure {
    pub context: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct PriorOutcome {
    pub graph: CausalGraph,
    pub requests: usize,
    pub failures: Vec<PromptFailure>,
    /// Names in responses that match no variable.
    pub unknown_names: Vec<String>,
}

fn label(node: &Node) -> String {
    match node.description.as_deref().map(str::trim) {
        Some(d) if !d.is_empty() => format!("{} ({d})", node.name),
        _ => node.name.clone(),
    }
}

fn variable_block(vars: &[Node]) -> String {
    vars.iter()
        .map(|v| format!("- {}", label(v)))
        .collect::<Vec<_>>()
        .join("\n")
}

fn graph_of(vars: &[Node]) -> Result<CausalGraph, LlmError> {
    let mut g = CausalGraph::new();
    for v in vars {
        g.add_node(&v.name, v.description.clone())?;
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairAnswer {
    /// First variable causes the second.
    Forward,
    Backward,
    Neither,
}

/// Reads `Answer: A|B|C` (case-insensitive, optional parentheses).
pub fn parse_pair_answer(text: &str) -> Option<PairAnswer> {
    let lower = text.to_ascii_lowercase();
    let at = lower.find("answer")?;
    let rest = lower[at + "answer".len()..].trim_start();
    let rest = rest.strip_prefix(':')?.trim_start();
    let rest = rest.strip_prefix('(').unwrap_or(rest);
    let mut chars = rest.chars();
    let choice = chars.next()?;
    if chars.next().is_some_and(|c| c.is_ascii_alphanumeric()) {
        return None;
    }
    match choice {
        'a' => Some(PairAnswer::Forward),
        'b' => Some(PairAnswer::Backward),
        'c' => Some(PairAnswer::Neither),
        _ => None,
    }
}

pub fn render_pair_prompt(a: &Node, b: &Node) -> String {
    fill(
        PAIRWISE,
        &[
            ("a_label", &label(a)),
            ("b_label", &label(b)),
            ("a_name", &a.name),
            ("b_name", &b.name),
        ],
    )
}

/// One question per unordered pair, each retried up to `retries` times when
/// the call or the answer fails. Pairs that never yield an answer are
/// recorded and left without an edge.
pub fn pairwise_prior(
    vars: &[Node],
    client: &dyn ChatClient,
    retries: usize,
) -> Result<PriorOutcome, LlmError> {
    if vars.len() < 2 {
        return Err(LlmError::Input("pairwise elicitation needs at least two variables".into()));
    }
    let mut graph = graph_of(vars)?;
    let pairs: Vec<(usize, usize)> = (0..vars.len())
        .flat_map(|a| ((a + 1)..vars.len()).map(move |b| (a, b)))
        .collect();
    let answers: Vec<(usize, Result<PairAnswer, String>)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let prompt = render_pair_prompt(&vars[a], &vars[b]);
            let mut requests = 0;
            let mut last = String::new();
            for _ in 0..=retries {
                requests += 1;
                match client.complete(&prompt) {
                    Ok(text) => match parse_pair_answer(&text) {
                        Some(ans) => return (requests, Ok(ans)),
                        None => last = format!("unparseable answer: {}", text.trim()),
                    },
                    Err(e) => last = e.to_string(),
                }
            }
            (requests, Err(last))
        })
        .collect();
    let mut requests = 0;
    let mut failures = Vec::new();
    for (&(a, b), (n, ans)) in pairs.iter().zip(answers) {
        requests += n;
        match ans {
            Ok(PairAnswer::Forward) => graph.add_directed(a, b)?,
            Ok(PairAnswer::Backward) => graph.add_directed(b, a)?,
            Ok(PairAnswer::Neither) => {}
            Err(error) => failures.push(PromptFailure {
                context: format!("{} / {}", vars[a].name, vars[b].name),
                error,
            }),
        }
    }
    Ok(PriorOutcome {
        graph,
        requests,
        failures,
        unknown_names: Vec::new(),
    })
}

pub fn render_roots_prompt(vars: &[Node]) -> String {
    fill(BFS_ROOTS, &[("variables", &variable_block(vars))])
}

pub fn render_expand_prompt(vars: &[Node], node: usize, candidates: &[usize]) -> String {
    let names: Vec<&str> = candidates.iter().map(|&c| vars[c].name.as_str()).collect();
    fill(
        BFS_EXPAND,
        &[
            ("variables", &variable_block(vars)),
            ("node", &vars[node].name),
            ("candidates", &node_list(&names)),
        ],
    )
}

struct Budget<'a> {
    client: &'a dyn ChatClient,
    left: usize,
    used: usize,
}

impl Budget<'_> {
    /// A node list from the model, retried on failure. `None` when the
    /// budget runs out or every attempt fails.
    fn ask(&mut self, prompt: &str, retries: usize, context: &str, failures: &mut Vec<PromptFailure>) -> Option<Vec<String>> {
        let mut last = None;
        for _ in 0..=retries {
            if self.left == 0 {
                last.get_or_insert_with(|| "prompt budget exhausted".to_string());
                break;
            }
            self.left -= 1;
            self.used += 1;
            match self.client.complete(prompt) {
                Ok(text) => match parse_node_list(&text) {
                    Ok(names) => return Some(names),
                    Err(e) => last = Some(e),
                },
                Err(e) => last = Some(e.to_string()),
            }
        }
        failures.push(PromptFailure {
            context: context.to_string(),
            error: last.unwrap_or_default(),
        });
        None
    }
}

/// Breadth-first elicitation: ask for root causes, then for the direct
/// effects of each dequeued variable among all others. Uses at most
/// `2n + 1` prompts including retries.
pub fn bfs_prior(
    vars: &[Node],
    client: &dyn ChatClient,
    retries: usize,
) -> Result<PriorOutcome, LlmError> {
    if vars.is_empty() {
        return Err(LlmError::Input("BFS elicitation needs at least one variable".into()));
    }
    let n = vars.len();
    let mut graph = graph_of(vars)?;
    let mut budget = Budget {
        client,
        left: 2 * n + 1,
        used: 0,
    };
    let mut failures = Vec::new();
    let mut unknown = BTreeSet::new();
    let lookup = |name: &str, unknown: &mut BTreeSet<String>| {
        let key = name.trim().to_lowercase();
        let hit = vars.iter().position(|v| v.name.to_lowercase() == key);
        if hit.is_none() {
            unknown.insert(name.trim().to_string());
        }
        hit
    };

    let mut visited = vec![false; n];
    let mut queue = VecDeque::new();
    if let Some(roots) = budget.ask(&render_roots_prompt(vars), retries, "roots", &mut failures) {
        for name in roots {
            if let Some(r) = lookup(&name, &mut unknown) {
                if !visited[r] {
                    visited[r] = true;
                    queue.push_back(r);
                }
            }
        }
    }
    while let Some(u) = queue.pop_front() {
        let candidates: Vec<usize> = (0..n).filter(|&c| c != u).collect();
        if candidates.is_empty() {
            continue;
        }
        if budget.left == 0 {
            break;
        }
        let prompt = render_expand_prompt(vars, u, &candidates);
        let Some(children) = budget.ask(&prompt, retries, &vars[u].name, &mut failures) else {
            continue;
        };
        for name in children {
            let Some(c) = lookup(&name, &mut unknown) else { continue };
            if c == u || graph.is_adjacent(u, c) {
                continue;
            }
            graph.add_directed(u, c)?;
            if !visited[c] {
                visited[c] = true;
                queue.push_back(c);
            }
        }
    }
    Ok(PriorOutcome {
        graph,
        requests: budget.used,
        failures,
        unknown_names: unknown.into_iter().collect(),
    })
}
