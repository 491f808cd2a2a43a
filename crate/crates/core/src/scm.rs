//! Synthetic observational data from structural causal models.
//!
//! Nodes are generated in topological order. Root nodes are standard normal;
//! every other node is `f_i(parents) + noise`, where `f_i` is either a linear
//! map or a small ReLU MLP.
//!
//! MLP depth counts weight layers: `depth = 3` means two hidden layers of
//! `width` units and a linear scalar output, i.e. weight shapes
//! `[(|Pa| × w), (w × w), (w × 1)]`. Hidden biases start at zero and the
//! output layer has none, so an all-zero-weight MLP contributes exactly 0.
//!
//! Randomness is split by hashing `(seed, node index, stream tag)`: parameter
//! draws for one node never depend on other nodes, and each row's noise for
//! node `i` comes from ChaCha stream `row` of that node's key, so parallel
//! sampling is bit-identical for any worker count.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::Dataset;
use crate::graph::{CausalGraph, GraphError};

const TAG_PARAMS: u64 = 0x5041_5241_4d53; // "PARAMS"
const TAG_NOISE: u64 = 0x004e_4f49_5345; // "NOISE"
const TAG_DAG: u64 = 0x0044_4147; // "DAG"

#[derive(Debug, Error)]
pub enum ScmError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid mechanism: {0}")]
    Spec(String),
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed derived from a sequence of integers.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |h, &p| splitmix(h ^ splitmix(p)))
}

/// A scalar sampling law for weights and coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dist {
    Uniform { lo: f64, hi: f64 },
    /// Second parameter is the standard deviation.
    Normal { mean: f64, std: f64 },
    /// `N(0, 2 / (fan_in + fan_out))`.
    XavierNormal,
    Constant { value: f64 },
}

impl Dist {
    fn validate(&self) -> Result<(), ScmError> {
        match *self {
            Dist::Uniform { lo, hi } if !(lo < hi) => {
                Err(ScmError::Spec(format!("uniform needs lo < hi, got ({lo}, {hi})")))
            }
            Dist::Normal { std, .. } if !(std > 0.0) => {
                Err(ScmError::Spec(format!("normal needs std > 0, got {std}")))
            }
            _ => Ok(()),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, fan_in: usize, fan_out: usize) -> f64 {
        match *self {
            Dist::Uniform { lo, hi } => rng.random_range(lo..hi),
            Dist::Normal { mean, std } => Normal::new(mean, std).expect("validated").sample(rng),
            Dist::XavierNormal => {
                let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
                std * rng.sample::<f64, _>(StandardNormal)
            }
            Dist::Constant { value } => value,
        }
    }
}

fn parse_two(args: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = args.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated numbers, got `{args}`"));
    }
    let a = parts[0].parse().map_err(|_| format!("bad number `{}`", parts[0]))?;
    let b = parts[1].parse().map_err(|_| format!("bad number `{}`", parts[1]))?;
    Ok((a, b))
}

impl FromStr for Dist {
    type Err = String;

    /// `uniform:LO,HI`, `normal:MEAN,STD`, `xavier`, `const:V`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, args) = s.split_once(':').unwrap_or((s, ""));
        match head.trim() {
            "uniform" => parse_two(args).map(|(lo, hi)| Dist::Uniform { lo, hi }),
            "normal" => parse_two(args).map(|(mean, std)| Dist::Normal { mean, std }),
            "xavier" => Ok(Dist::XavierNormal),
            "const" => args
                .trim()
                .parse()
                .map(|value| Dist::Constant { value })
                .map_err(|_| format!("bad constant `{args}`")),
            other => Err(format!("unknown distribution `{other}`")),
        }
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dist::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Dist::Normal { mean, std } => write!(f, "normal:{mean},{std}"),
            Dist::XavierNormal => write!(f, "xavier"),
            Dist::Constant { value } => write!(f, "const:{value}"),
        }
    }
}

/// Exogenous noise law for non-root nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Gaussian { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::Gaussian { mean: 0.0, std: 1.0 }
    }
}

impl NoiseSpec {
    fn validate(&self) -> Result<(), ScmError> {
        match *self {
            NoiseSpec::Gaussian { std, .. } if !(std > 0.0) => {
                Err(ScmError::Spec(format!("noise std must be > 0, got {std}")))
            }
            NoiseSpec::Uniform { lo, hi } if !(lo < hi) => {
                Err(ScmError::Spec(format!("noise needs lo < hi, got ({lo}, {hi})")))
            }
            _ => Ok(()),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseSpec::Gaussian { mean, std } => mean + std * rng.sample::<f64, _>(StandardNormal),
            NoiseSpec::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

impl FromStr for NoiseSpec {
    type Err = String;

    /// `gaussian:MEAN,STD` or `uniform:LO,HI`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, args) = s.split_once(':').unwrap_or((s, ""));
        match head.trim() {
            "gaussian" | "normal" => parse_two(args).map(|(mean, std)| NoiseSpec::Gaussian { mean, std }),
            "uniform" => parse_two(args).map(|(lo, hi)| NoiseSpec::Uniform { lo, hi }),
            other => Err(format!("unknown noise law `{other}`")),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::Gaussian { mean, std } => write!(f, "gaussian:{mean},{std}"),
            NoiseSpec::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MechanismSpec {
    Linear { coef: Dist },
    Mlp {
        depth: usize,
        width: usize,
        activation: Activation,
        init: Dist,
    },
}

impl MechanismSpec {
    /// Linear mechanism with weights from `U(0, 2)`.
    pub fn linear() -> Self {
        MechanismSpec::Linear {
            coef: Dist::Uniform { lo: 0.0, hi: 2.0 },
        }
    }

    /// Three weight layers, four hidden units, ReLU, `U(0, 1)` weights.
    pub fn mlp() -> Self {
        MechanismSpec::Mlp {
            depth: 3,
            width: 4,
            activation: Activation::Relu,
            init: Dist::Uniform { lo: 0.0, hi: 1.0 },
        }
    }

    fn validate(&self) -> Result<(), ScmError> {
        match self {
            MechanismSpec::Linear { coef } => coef.validate(),
            MechanismSpec::Mlp { depth, width, init, .. } => {
                if *depth < 2 {
                    return Err(ScmError::Spec(format!("mlp depth must be >= 2, got {depth}")));
                }
                if *width < 1 {
                    return Err(ScmError::Spec("mlp width must be >= 1".into()));
                }
                init.validate()
            }
        }
    }
}

/// A dense layer mapping `inputs` values to `outputs` values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `inputs × outputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (i, &v) in input.iter().enumerate() {
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += v * w;
            }
        }
        out
    }
}

/// Realized per-node structural equation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeMechanism {
    /// Standard normal draw, no parents.
    Root,
    Linear { weights: Vec<f64> },
    Mlp { activation: Activation, layers: Vec<Layer> },
}

impl NodeMechanism {
    fn eval(&self, parents: &[f64]) -> f64 {
        match self {
            NodeMechanism::Root => 0.0,
            NodeMechanism::Linear { weights } => weights.iter().zip(parents).map(|(w, p)| w * p).sum(),
            NodeMechanism::Mlp { activation, layers } => {
                let mut h = parents.to_vec();
                let last = layers.len() - 1;
                for (l, layer) in layers.iter().enumerate() {
                    h = layer.forward(&h);
                    if l < last {
                        h.iter_mut().for_each(|v| *v = activation.apply(*v));
                    }
                }
                h[0]
            }
        }
    }

    fn fits(&self, n_parents: usize) -> bool {
        match self {
            NodeMechanism::Root => n_parents == 0,
            NodeMechanism::Linear { weights } => n_parents > 0 && weights.len() == n_parents,
            NodeMechanism::Mlp { layers, .. } => {
                n_parents > 0
                    && layers.len() >= 2
                    && layers[0].inputs == n_parents
                    && layers.last().map(|l| l.outputs) == Some(1)
                    && layers.windows(2).all(|w| w[0].outputs == w[1].inputs)
                    && layers
                        .iter()
                        .all(|l| l.weights.len() == l.inputs * l.outputs && l.bias.len() == l.outputs)
            }
        }
    }
}

/// A fully parameterized SCM over a DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmSpec {
    graph: CausalGraph,
    order: Vec<usize>,
    parents: Vec<Vec<usize>>,
    mechanisms: Vec<NodeMechanism>,
    noise: NoiseSpec,
    seed: u64,
}

/// Samples every mechanism parameter deterministically from `seed`.
pub fn build_scm(
    graph: &CausalGraph,
    mech: MechanismSpec,
    noise: NoiseSpec,
    seed: u64,
) -> Result<ScmSpec, ScmError> {
    mech.validate()?;
    noise.validate()?;
    let order = graph.topological_order()?;
    let parents: Vec<Vec<usize>> = (0..graph.n_nodes())
        .map(|v| {
            let mut p = graph.parents(v);
            p.sort_unstable();
            p
        })
        .collect();
    let mechanisms = parents
        .iter()
        .enumerate()
        .map(|(v, pa)| {
            if pa.is_empty() {
                return NodeMechanism::Root;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, v as u64, TAG_PARAMS]));
            match mech {
                MechanismSpec::Linear { coef } => NodeMechanism::Linear {
                    weights: (0..pa.len()).map(|_| coef.draw(&mut rng, pa.len(), 1)).collect(),
                },
                MechanismSpec::Mlp { depth, width, activation, init } => {
                    let mut layers = Vec::with_capacity(depth);
                    for l in 0..depth {
                        let inputs = if l == 0 { pa.len() } else { width };
                        let outputs = if l + 1 == depth { 1 } else { width };
                        let weights = (0..inputs * outputs)
                            .map(|_| init.draw(&mut rng, inputs, outputs))
                            .collect();
                        layers.push(Layer {
                            inputs,
                            outputs,
                            weights,
                            bias: vec![0.0; outputs],
                        });
                    }
                    NodeMechanism::Mlp { activation, layers }
                }
            }
        })
        .collect();
    Ok(ScmSpec {
        graph: graph.clone(),
        order,
        parents,
        mechanisms,
        noise,
        seed,
    })
}

impl ScmSpec {
    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn mechanism(&self, v: usize) -> &NodeMechanism {
        &self.mechanisms[v]
    }

    /// Swaps in a mechanism for node `v`; its shape must match `|Pa(v)|`.
    pub fn replace_mechanism(&mut self, v: usize, mech: NodeMechanism) -> Result<(), ScmError> {
        if v >= self.mechanisms.len() || !mech.fits(self.parents[v].len()) {
            return Err(ScmError::Spec(format!(
                "mechanism does not fit node {v} with {} parents",
                self.parents.get(v).map_or(0, Vec::len)
            )));
        }
        self.mechanisms[v] = mech;
        Ok(())
    }

    /// Deterministic part of node `v` given its parents' values.
    pub fn structural_value(&self, v: usize, parent_values: &[f64]) -> f64 {
        self.mechanisms[v].eval(parent_values)
    }

    /// `n` joint samples, columns in graph node order.
    pub fn sample(&self, n: usize, sample_seed: u64) -> Result<Dataset, crate::data::DataError> {
        let d = self.graph.n_nodes();
        let bases: Vec<ChaCha8Rng> = (0..d)
            .map(|v| ChaCha8Rng::seed_from_u64(derive_seed(&[sample_seed, v as u64, TAG_NOISE])))
            .collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|r| {
                let mut row = vec![0.0; d];
                for &v in &self.order {
                    let mut rng = bases[v].clone();
                    rng.set_stream(r as u64);
                    row[v] = match &self.mechanisms[v] {
                        NodeMechanism::Root => rng.sample::<f64, _>(StandardNormal),
                        mech => {
                            let pv: Vec<f64> = self.parents[v].iter().map(|&p| row[p]).collect();
                            mech.eval(&pv) + self.noise.draw(&mut rng)
                        }
                    };
                }
                row
            })
            .collect();
        let values = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        Dataset::new(self.graph.names(), values)
    }

    /// Parameter dump for provenance records.
    pub fn parameters_json(&self) -> serde_json::Value {
        let nodes: Vec<serde_json::Value> = (0..self.graph.n_nodes())
            .map(|v| {
                serde_json::json!({
                    "node": self.graph.name(v),
                    "parents": self.parents[v].iter().map(|&p| self.graph.name(p)).collect::<Vec<_>>(),
                    "mechanism": self.mechanisms[v],
                })
            })
            .collect();
        serde_json::json!({ "seed": self.seed, "noise": self.noise, "nodes": nodes })
    }
}

/// Erdős-Rényi DAG: a seeded random node permutation, then each forward
/// pair of that permutation becomes an edge with probability `edge_prob`.
pub fn random_dag(n_nodes: usize, edge_prob: f64, seed: u64) -> CausalGraph {
    let names: Vec<String> = (0..n_nodes).map(|i| format!("X{i}")).collect();
    let mut g = CausalGraph::with_nodes(&names).expect("generated names are unique");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, TAG_DAG]));
    let mut perm: Vec<usize> = (0..n_nodes).collect();
    perm.shuffle(&mut rng);
    for a in 0..n_nodes {
        for b in (a + 1)..n_nodes {
            if rng.random::<f64>() < edge_prob {
                g.add_directed(perm[a], perm[b]).expect("forward edges never conflict");
            }
        }
    }
    g
}
