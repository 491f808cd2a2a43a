use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "llmpc", version, about = "Causal discovery with PC, LLM priors and evaluation tools")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Sample a synthetic dataset from a graph.
    GenData(GenDataArgs),
    /// Run PC, optionally constrained by a prior graph.
    Discover(DiscoverArgs),
    /// Break cycles, prune weak edges and add missing ones.
    Refine(RefineArgs),
    /// Ask a chat model for a causal graph over a set of variables.
    Prior(PriorArgs),
    /// Probe whether a chat model has memorized a known graph.
    Memtest(MemtestArgs),
    /// Score a predicted graph against a reference graph.
    Evaluate(EvaluateArgs),
    /// Print size and shape statistics of a graph.
    Stats(StatsArgs),
    /// Run a method x dataset grid from a TOML config.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Mech {
    Linear,
    Mlp,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Act {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Ci {
    #[value(alias = "fisher-z", alias = "fisherz", alias = "pc")]
    FisherZ,
    #[value(alias = "pc-kci")]
    Kci,
    Oracle,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Order {
    HighestPFirst,
    LowestPFirst,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Pairwise,
    Bfs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    #[value(alias = "M1")]
    M1,
    #[value(alias = "M2")]
    M2,
    #[value(alias = "M3")]
    M3,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[value(alias = "directed", alias = "strict")]
    DirectedStrict,
    Skeleton,
    #[value(alias = "cpdag")]
    CpdagAware,
}

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    /// Graph file, or a builtin: chain<N>, collider, fork.
    #[arg(long)]
    pub graph: String,
    #[arg(long, value_enum, default_value_t = Mech::Mlp)]
    pub mech: Mech,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// `gaussian:MEAN,STD` or `uniform:LO,HI`.
    #[arg(long, default_value = "gaussian:0,1")]
    pub noise: String,
    /// Linear weight law: `uniform:LO,HI`, `normal:MEAN,STD`, `const:V`.
    #[arg(long, default_value = "uniform:0,2")]
    pub coef: String,
    /// MLP weight law; also accepts `xavier`.
    #[arg(long, default_value = "uniform:0,1")]
    pub init: String,
    /// MLP weight layers.
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 4)]
    pub width: usize,
    #[arg(long, value_enum, default_value_t = Act::Relu)]
    pub activation: Act,
    /// Output file; stdout when omitted (no manifest is written then).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the realized mechanism parameters as JSON.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TestSource {
    /// Observational data (CSV with a header row).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Reference graph for the d-separation oracle.
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long, value_enum, default_value_t = Ci::FisherZ, alias = "method", alias = "ci-test")]
    pub ci: Ci,
    /// Rows kept by the kernel test.
    #[arg(long, default_value_t = 1200)]
    pub kci_max_rows: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct DiscoverArgs {
    #[command(flatten)]
    pub source: TestSource,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Largest conditioning set; unbounded for the oracle by default, 3 otherwise.
    #[arg(long)]
    pub max_cond: Option<usize>,
    /// Graph whose edges are required; its forbidden list is honored too.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Forbid every pair the prior does not connect.
    #[arg(long)]
    pub forbid_from_prior: bool,
    /// Output file; stdout when omitted (no manifest is written then).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Separating sets and orientation conflicts as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value = "discovered")]
    pub name: String,
}

#[derive(Debug, Args, Serialize)]
pub struct RefineArgs {
    #[arg(long)]
    pub graph: String,
    #[command(flatten)]
    pub source: TestSource,
    /// Fraction of edges to prune.
    #[arg(long, default_value_t = 0.0, alias = "prune-frac")]
    pub prune: f64,
    #[arg(long, value_enum, default_value_t = Order::HighestPFirst)]
    pub order: Order,
    /// Add edges between dependent non-adjacent pairs at this level.
    #[arg(long)]
    pub expand: Option<f64>,
    /// Graph whose directions are preferred when orienting.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Output file; stdout when omitted (no manifest is written then).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Edge scores of the prune and expand steps as CSV.
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct LlmArgs {
    /// Model name; defaults to $LLMPC_MODEL or gpt-4.
    #[arg(long)]
    pub model: Option<String>,
    /// Chat-completions URL; defaults to $LLMPC_ENDPOINT.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value = ".llm-cache")]
    pub cache_dir: PathBuf,
    /// Send cache misses to the endpoint instead of failing.
    #[arg(long)]
    pub online: bool,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    /// Extra attempts per prompt.
    #[arg(long, default_value_t = 2)]
    pub retries: usize,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 60)]
    pub timeout: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct PriorArgs {
    /// Graph file whose nodes (and descriptions) are the variables.
    #[arg(long)]
    pub vars: String,
    #[arg(long, value_enum, default_value_t = Strategy::Bfs)]
    pub strategy: Strategy,
    /// Output file; stdout when omitted (no manifest is written then).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub llm: LlmArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct MemtestArgs {
    #[arg(long)]
    pub graph: String,
    #[arg(long, value_enum, default_value_t = Kind::All)]
    pub kind: Kind,
    /// Share of nodes or edges revealed in the prompt.
    #[arg(long, default_value_t = 0.5, alias = "alpha")]
    pub fraction: f64,
    /// Name used in the prompt; defaults to the graph's name.
    #[arg(long)]
    pub dataset_name: Option<String>,
    /// Output file; stdout when omitted (no manifest is written then).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub llm: LlmArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: String,
    #[arg(long)]
    pub truth: String,
    #[arg(long, value_enum, default_value_t = Mode::DirectedStrict)]
    pub mode: Mode,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    pub graph: String,
    /// Count only colliders whose parents are non-adjacent.
    #[arg(long)]
    pub unshielded: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}
