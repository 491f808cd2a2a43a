//! Method × dataset benchmark grid.
//!
//! A TOML config lists datasets (reference graph plus either a CSV file or
//! synthetic-data settings), methods (CI test and prior source) and the
//! seeds and alphas to sweep. Cells run in parallel; output rows are always
//! ordered by method, dataset, alpha and seed.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{edge_metrics, rewire_edges, EvalError, MatchMode};
use crate::ci::{CiTest, DSepOracle, FisherZ, Kci, KciConfig};
use crate::data::Dataset;
use crate::graph::{CausalGraph, GraphFile};
use crate::pc::{discover, PcConfig, PriorKnowledge};
use crate::scm::{build_scm, derive_seed, MechanismSpec, NoiseSpec};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_n")]
    pub n_samples: usize,
    #[serde(default)]
    pub mode: Option<String>,
    /// Conditioning-set cap for sample-based tests.
    #[serde(default)]
    pub max_cond: Option<usize>,
    pub datasets: Vec<DatasetSpec>,
    pub methods: Vec<MethodSpec>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_alphas() -> Vec<f64> {
    vec![0.05]
}

fn default_n() -> usize {
    1000
}

fn default_mechanism() -> String {
    "mlp".into()
}

fn default_rewire() -> f64 {
    0.2
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub graph: PathBuf,
    /// Observational data; synthesized from `graph` when absent.
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default = "default_mechanism")]
    pub mechanism: String,
    #[serde(default)]
    pub noise: Option<String>,
    /// Prior graph file used by methods with `prior = "file"`.
    #[serde(default)]
    pub prior: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSource {
    None,
    /// The dataset's prior file.
    File,
    /// The reference graph itself.
    Truth,
    /// The reference graph with a fraction of edges moved elsewhere.
    Rewired,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub name: String,
    /// `fisher_z`, `kci`, `oracle`, or `none` to report the prior itself.
    pub ci: String,
    #[serde(default = "PriorSource::none")]
    pub prior: PriorSource,
    #[serde(default = "default_rewire")]
    pub rewire_fraction: f64,
    #[serde(default)]
    pub forbid_non_prior: bool,
    /// Fraction of the reference graph's non-adjacent pairs given as
    /// forbidden edges.
    #[serde(default)]
    pub forbid_fraction: f64,
}

impl PriorSource {
    fn none() -> Self {
        PriorSource::None
    }
}

impl BenchConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, EvalError> {
        let mut cfg: BenchConfig = toml::from_str(text).map_err(|e| EvalError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Input {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn mode(&self) -> Result<MatchMode, EvalError> {
        self.mode
            .as_deref()
            .map_or(Ok(MatchMode::DirectedStrict), |m| m.parse().map_err(EvalError::Config))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn validate(&self) -> Result<(), EvalError> {
        self.mode()?;
        if self.datasets.is_empty() || self.methods.is_empty() {
            return Err(EvalError::Config("need at least one dataset and one method".into()));
        }
        if self.seeds.is_empty() || self.alphas.is_empty() {
            return Err(EvalError::Config("seeds and alphas must be non-empty".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(EvalError::Config(format!("alpha {a} outside (0, 1)")));
        }
        let mut names = BTreeSet::new();
        for m in &self.methods {
            if !["fisher_z", "kci", "oracle", "none"].contains(&m.ci.as_str()) {
                return Err(EvalError::Config(format!("method `{}`: unknown ci `{}`", m.name, m.ci)));
            }
            if m.ci == "none" && m.prior == PriorSource::None {
                return Err(EvalError::Config(format!("method `{}` has neither a test nor a prior", m.name)));
            }
            if !names.insert(&m.name) {
                return Err(EvalError::Config(format!("duplicate method `{}`", m.name)));
            }
        }
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            d.mechanism_spec()?;
            d.noise_spec()?;
            if !names.insert(&d.name) {
                return Err(EvalError::Config(format!("duplicate dataset `{}`", d.name)));
            }
        }
        Ok(())
    }
}

impl DatasetSpec {
    fn mechanism_spec(&self) -> Result<MechanismSpec, EvalError> {
        match self.mechanism.as_str() {
            "linear" => Ok(MechanismSpec::linear()),
            "mlp" => Ok(MechanismSpec::mlp()),
            other => Err(EvalError::Config(format!("dataset `{}`: unknown mechanism `{other}`", self.name))),
        }
    }

    fn noise_spec(&self) -> Result<NoiseSpec, EvalError> {
        self.noise
            .as_deref()
            .map_or(Ok(NoiseSpec::default()), |s| {
                s.parse().map_err(|e| EvalError::Config(format!("dataset `{}`: {e}", self.name)))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub method: String,
    pub dataset: String,
    pub alpha: f64,
    pub seed: u64,
    pub tp: Option<usize>,
    pub fp: Option<usize>,
    #[serde(rename = "fn")]
    pub fn_: Option<usize>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub mode: MatchMode,
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub alphas: Vec<f64>,
    pub rows: Vec<RunRow>,
}

struct Loaded {
    truth: CausalGraph,
    data: Option<Dataset>,
    prior: Option<CausalGraph>,
}

fn input_err(path: &Path, e: impl ToString) -> String {
    format!("{}: {}", path.display(), e.to_string())
}

fn load_dataset(cfg: &BenchConfig, d: &DatasetSpec) -> Result<Loaded, String> {
    let gp = cfg.resolve(&d.graph);
    let truth = GraphFile::load(&gp).map_err(|e| input_err(&gp, e))?.graph;
    let data = match &d.data {
        Some(p) => {
            let p = cfg.resolve(p);
            Some(Dataset::read_csv(&p).map_err(|e| input_err(&p, e))?)
        }
        None => None,
    };
    let prior = match &d.prior {
        Some(p) => {
            let p = cfg.resolve(p);
            Some(GraphFile::load(&p).map_err(|e| input_err(&p, e))?.graph)
        }
        None => None,
    };
    Ok(Loaded { truth, data, prior })
}

fn named_edges(g: &CausalGraph) -> Vec<(String, String)> {
    g.directed_edges()
        .map(|(u, v)| (g.name(u).to_string(), g.name(v).to_string()))
        .collect()
}

fn run_cell(
    cfg: &BenchConfig,
    spec: &DatasetSpec,
    loaded: &Loaded,
    method: &MethodSpec,
    alpha: f64,
    seed: u64,
    mode: MatchMode,
) -> Result<super::EvalReport, String> {
    let truth = &loaded.truth;
    let prior_graph = match method.prior {
        PriorSource::None => None,
        PriorSource::Truth => Some(truth.clone()),
        PriorSource::Rewired => Some(rewire_edges(truth, method.rewire_fraction, seed)),
        PriorSource::File => Some(
            loaded
                .prior
                .clone()
                .ok_or_else(|| format!("dataset `{}` has no prior file", spec.name))?,
        ),
    };
    if method.ci == "none" {
        let g = prior_graph.expect("validated");
        return edge_metrics(&g, truth, mode).map_err(|e| e.to_string());
    }

    let data = match (&loaded.data, method.ci.as_str()) {
        (_, "oracle") => None,
        (Some(d), _) => Some(d.clone()),
        (None, _) => {
            let scm = build_scm(
                truth,
                spec.mechanism_spec().map_err(|e| e.to_string())?,
                spec.noise_spec().map_err(|e| e.to_string())?,
                derive_seed(&[seed, 1]),
            )
            .map_err(|e| e.to_string())?;
            Some(scm.sample(cfg.n_samples, derive_seed(&[seed, 2])).map_err(|e| e.to_string())?)
        }
    };
    let test: Box<dyn CiTest> = match (method.ci.as_str(), &data) {
        ("oracle", _) => Box::new(DSepOracle::new(truth.clone()).map_err(|e| e.to_string())?),
        ("fisher_z", Some(d)) => Box::new(FisherZ::new(d)),
        ("kci", Some(d)) => Box::new(Kci::new(d, KciConfig { seed, ..KciConfig::default() })),
        _ => unreachable!("validated"),
    };
    let vars = test.variables().to_vec();
    let mut forbidden: Vec<(String, String)> = Vec::new();
    if method.forbid_fraction > 0.0 {
        let n = truth.n_nodes();
        let mut free: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && !truth.is_adjacent(a, b))
            .filter(|&(a, b)| !prior_graph.as_ref().is_some_and(|p| p.is_adjacent(a, b)))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 3]));
        free.shuffle(&mut rng);
        let k = (method.forbid_fraction.clamp(0.0, 1.0) * free.len() as f64).round() as usize;
        forbidden = free[..k]
            .iter()
            .map(|&(u, v)| (truth.name(u).to_string(), truth.name(v).to_string()))
            .collect();
    }
    let required = prior_graph.as_ref().map(named_edges).unwrap_or_default();
    let mut prior = PriorKnowledge::from_names(&vars, &required, &forbidden).map_err(|e| e.to_string())?;
    if method.forbid_non_prior {
        prior = prior.forbid_non_prior(vars.len());
    }
    let pc_cfg = PcConfig {
        alpha,
        max_cond_size: if method.ci == "oracle" { None } else { Some(cfg.max_cond.unwrap_or(3)) },
    };
    let out = discover(test.as_ref(), &pc_cfg, &prior).map_err(|e| e.to_string())?;
    edge_metrics(&out.graph, truth, mode).map_err(|e| e.to_string())
}

/// Runs every (method, dataset, alpha, seed) cell. Failed cells are kept as
/// rows with an error and blank metrics.
pub fn bench_matrix(cfg: &BenchConfig) -> Result<BenchReport, EvalError> {
    let mode = cfg.mode()?;
    let loaded: Vec<Result<Loaded, String>> = cfg.datasets.par_iter().map(|d| load_dataset(cfg, d)).collect();
    let mut cells = Vec::new();
    for (mi, _) in cfg.methods.iter().enumerate() {
        for (di, _) in cfg.datasets.iter().enumerate() {
            for &alpha in &cfg.alphas {
                for &seed in &cfg.seeds {
                    cells.push((mi, di, alpha, seed));
                }
            }
        }
    }
    let rows: Vec<RunRow> = cells
        .par_iter()
        .map(|&(mi, di, alpha, seed)| {
            let method = &cfg.methods[mi];
            let spec = &cfg.datasets[di];
            let res = loaded[di]
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|l| run_cell(cfg, spec, l, method, alpha, seed, mode));
            let mut row = RunRow {
                method: method.name.clone(),
                dataset: spec.name.clone(),
                alpha,
                seed,
                tp: None,
                fp: None,
                fn_: None,
                precision: None,
                recall: None,
                f1: None,
                error: None,
            };
            match res {
                Ok(r) => {
                    row.tp = Some(r.tp);
                    row.fp = Some(r.fp);
                    row.fn_ = Some(r.fn_);
                    row.precision = Some(r.precision);
                    row.recall = Some(r.recall);
                    row.f1 = Some(r.f1);
                }
                Err(e) => row.error = Some(e),
            }
            row
        })
        .collect();
    Ok(BenchReport {
        mode,
        methods: cfg.methods.iter().map(|m| m.name.clone()).collect(),
        datasets: cfg.datasets.iter().map(|d| d.name.clone()).collect(),
        alphas: cfg.alphas.clone(),
        rows,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_f(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Mean (precision, recall, f1) over the successful runs of one cell group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub dataset: String,
    pub alpha: f64,
    pub runs: usize,
    pub metrics: Option<(f64, f64, f64)>,
}

impl BenchReport {
    /// One row per run.
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("method,dataset,alpha,seed,tp,fp,fn,precision,recall,f1,error\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                csv_field(&r.method),
                csv_field(&r.dataset),
                r.alpha,
                r.seed,
                opt(r.tp),
                opt(r.fp),
                opt(r.fn_),
                opt_f(r.precision),
                opt_f(r.recall),
                opt_f(r.f1),
                csv_field(r.error.as_deref().unwrap_or("")),
            );
        }
        out
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for m in &self.methods {
            for d in &self.datasets {
                for &a in &self.alphas {
                    let ok: Vec<&RunRow> = self
                        .rows
                        .iter()
                        .filter(|r| &r.method == m && &r.dataset == d && r.alpha == a && r.error.is_none())
                        .collect();
                    let mean = |f: fn(&RunRow) -> Option<f64>| {
                        ok.iter().map(|r| f(r).unwrap_or(0.0)).sum::<f64>() / ok.len() as f64
                    };
                    out.push(SummaryRow {
                        method: m.clone(),
                        dataset: d.clone(),
                        alpha: a,
                        runs: ok.len(),
                        metrics: (!ok.is_empty()).then(|| (mean(|r| r.precision), mean(|r| r.recall), mean(|r| r.f1))),
                    });
                }
            }
        }
        out
    }

    /// One row per (method, dataset, alpha), metrics averaged over seeds.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("method,dataset,alpha,runs,precision,recall,f1\n");
        for s in self.summary() {
            let (p, r, f) = match s.metrics {
                Some((p, r, f)) => (opt_f(Some(p)), opt_f(Some(r)), opt_f(Some(f))),
                None => Default::default(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{p},{r},{f}",
                csv_field(&s.method),
                csv_field(&s.dataset),
                s.alpha,
                s.runs
            );
        }
        out
    }

    /// Methods as rows, each dataset as a Pre / Rec / F1 column group.
    pub fn markdown(&self) -> String {
        let summary = self.summary();
        let mut header = vec!["Method".to_string()];
        for d in &self.datasets {
            for m in ["Pre", "Rec", "F1"] {
                header.push(format!("{d} {m}"));
            }
        }
        let mut body: Vec<Vec<String>> = Vec::new();
        for m in &self.methods {
            for &a in &self.alphas {
                let label = if self.alphas.len() > 1 { format!("{m} (alpha={a})") } else { m.clone() };
                let mut row = vec![label];
                for d in &self.datasets {
                    let cell = summary
                        .iter()
                        .find(|s| &s.method == m && &s.dataset == d && s.alpha == a)
                        .and_then(|s| s.metrics);
                    match cell {
                        Some((p, r, f)) => row.extend([p, r, f].map(|v| format!("{v:.2}"))),
                        None => row.extend(std::iter::repeat_n(String::new(), 3)),
                    }
                }
                body.push(row);
            }
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| body.iter().map(|r| r[c].len()).chain([header[c].len(), 3]).max().unwrap_or(3))
            .collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let mut out = line(&header);
        let rule: Vec<String> = widths
            .iter()
            .enumerate()
            .map(|(i, w)| if i == 0 { format!(":{}", "-".repeat(w - 1)) } else { format!("{}:", "-".repeat(w - 1)) })
            .collect();
        out.push_str(&format!("| {} |\n", rule.join(" | ")));
        for r in &body {
            out.push_str(&line(r));
        }
        out
    }

    pub fn errors(&self) -> Vec<&RunRow> {
        self.rows.iter().filter(|r| r.error.is_some()).collect()
    }

    pub fn errors_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.errors()
                .into_iter()
                .map(|r| {
                    serde_json::json!({
                        "method": r.method,
                        "dataset": r.dataset,
                        "alpha": r.alpha,
                        "seed": r.seed,
                        "error": r.error,
                    })
                })
                .collect(),
        )
    }
}
