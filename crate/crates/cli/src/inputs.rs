use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use llmpc_core::ci::{CiTest, DSepOracle, FisherZ, Kci, KciConfig};
use llmpc_core::data::Dataset;
use llmpc_core::graph::{CausalGraph, GraphFile};
use llmpc_core::llm::{CachedClient, LlmConfig};

use crate::args::{Ci, LlmArgs, TestSource};
use crate::manifest::Recorder;

/// Bad flag combination, reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn builtin(spec: &str) -> Option<GraphFile> {
    let (names, edges): (Vec<String>, Vec<(usize, usize)>) = match spec {
        "collider" => (vec!["X".into(), "Y".into(), "Z".into()], vec![(0, 2), (1, 2)]),
        "fork" => (vec!["X".into(), "Y".into(), "Z".into()], vec![(2, 0), (2, 1)]),
        _ => {
            let n: usize = spec.strip_prefix("chain")?.parse().ok().filter(|&n| n >= 1)?;
            ((1..=n).map(|i| format!("X{i}")).collect(), (1..n).map(|i| (i - 1, i)).collect())
        }
    };
    let mut g = CausalGraph::with_nodes(&names).ok()?;
    for (u, v) in edges {
        g.add_directed(u, v).ok()?;
    }
    Some(GraphFile::new(spec, g))
}

/// A graph file path, or the name of a builtin graph.
pub fn load_graph(spec: &str, rec: &mut Recorder) -> Result<GraphFile> {
    let path = Path::new(spec);
    if path.is_file() {
        rec.input(path);
        return GraphFile::load(path).with_context(|| format!("loading graph {spec}"));
    }
    match builtin(spec) {
        Some(g) => Ok(g),
        None => bail!("{spec}: no such graph file or builtin (chain<N>, collider, fork)"),
    }
}

pub fn load_data(path: &Path, rec: &mut Recorder) -> Result<Dataset> {
    rec.input(path);
    Dataset::read_csv(path).with_context(|| format!("loading data {}", path.display()))
}

pub fn ci_test(src: &TestSource, seed: u64, rec: &mut Recorder) -> Result<Box<dyn CiTest>> {
    match src.ci {
        Ci::Oracle => {
            let Some(truth) = &src.truth else {
                return Err(usage("--ci oracle needs --truth <graph>"));
            };
            let g = load_graph(truth, rec)?.graph;
            Ok(Box::new(DSepOracle::new(g)?))
        }
        Ci::FisherZ | Ci::Kci => {
            let Some(data) = &src.data else {
                return Err(usage("sample-based tests need --data <csv>"));
            };
            let data = load_data(data, rec)?;
            Ok(if src.ci == Ci::FisherZ {
                Box::new(FisherZ::new(&data))
            } else {
                Box::new(Kci::new(
                    &data,
                    KciConfig {
                        seed,
                        max_rows: src.kci_max_rows,
                        ..KciConfig::default()
                    },
                ))
            })
        }
    }
}

pub fn llm_client(args: &LlmArgs) -> (CachedClient, LlmConfig) {
    let mut cfg = LlmConfig::from_env();
    if let Some(m) = &args.model {
        cfg.model = m.clone();
    }
    if let Some(e) = &args.endpoint {
        cfg.endpoint = e.clone();
    }
    cfg.cache_dir = PathBuf::from(&args.cache_dir);
    cfg.offline = !args.online;
    cfg.temperature = args.temperature;
    cfg.retries = args.retries;
    cfg.timeout = std::time::Duration::from_secs(args.timeout);
    (CachedClient::from_config(&cfg), cfg)
}
