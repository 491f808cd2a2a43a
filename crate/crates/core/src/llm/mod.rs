//! Prompting chat models for causal priors and memorization probes.

mod client;
mod mem;
pub mod parse;
mod prior;
pub mod template;

pub use client::{
    cache_key, CachedClient, ChatClient, FnClient, HttpClient, LlmConfig, ENV_API_KEY, ENV_ENDPOINT,
    ENV_MODEL,
};
pub use mem::{
    parse_mem_response, render_mem_prompt, reveal_count, score_mem, split_for_mem, MemKind, MemScore,
    MemTask, NamedEdge, ParseStatus, Prf, PriorResponse,
};
pub use prior::{
    bfs_prior, pairwise_prior, parse_pair_answer, render_expand_prompt, render_pair_prompt,
    render_roots_prompt, PairAnswer, PriorOutcome, PromptFailure,
};

use thiserror::Error;

use crate::graph::GraphError;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("offline mode: no cached response for key {0}")]
    OfflineMiss(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
