//! GIN message passing over molecular graphs.
//!
//! Layer `l` computes `MLP((1 + ε)·z_v + Σ_{u∈N(v)} z_u)` for every node, with
//! the neighbor sum taken as an adjacency matmul. Every intermediate level is
//! kept because the projector consumes all of them.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{MolecularGraph, EDGE_FEATURE_DIM, NODE_FEATURE_DIM};
use crate::numerics::{NumericsError, ParameterStore, Tape, Tensor, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncoderError {
    #[error("expected {expected} node rows, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("over-smoothing statistics need at least two nodes")]
    SingleNodeGraph,
    #[error("graph has no atoms")]
    EmptyGraph,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GinConfig {
    pub layers: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub learn_epsilon: bool,
    /// Add a learned embedding of bond features to each neighbor message.
    pub edge_features: bool,
}

impl Default for GinConfig {
    fn default() -> Self {
        GinConfig {
            layers: 5,
            input_dim: NODE_FEATURE_DIM,
            hidden_dim: 64,
            learn_epsilon: true,
            edge_features: false,
        }
    }
}

impl GinConfig {
    pub fn with_width(layers: usize, hidden_dim: usize) -> Self {
        GinConfig { layers, hidden_dim, ..Self::default() }
    }

    /// Width of `levels[l]`.
    pub fn level_dim(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.hidden_dim
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.layers == 0 {
            return Err(EncoderError::InvalidConfig("layers must be at least 1".into()));
        }
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return Err(EncoderError::InvalidConfig("dimensions must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn param_name(layer: usize, part: &str) -> String {
    format!("gnn.layer{layer}.{part}")
}

/// Adds GIN parameters under `gnn.*`. Weights are uniform in `±1/√fan_in`,
/// biases and ε start at zero.
pub fn init_params<R: Rng>(config: &GinConfig, store: &mut ParameterStore, rng: &mut R) -> Result<(), EncoderError> {
    config.validate()?;
    for l in 1..=config.layers {
        let d_in = config.level_dim(l - 1);
        let d = config.hidden_dim;
        store.insert(param_name(l, "eps"), Tensor::zeros(1, 1), config.learn_epsilon)?;
        store.insert(param_name(l, "lin1.w"), Tensor::uniform(d_in, d, (d_in as f64).powf(-0.5), rng), true)?;
        store.insert(param_name(l, "lin1.b"), Tensor::zeros(1, d), true)?;
        store.insert(param_name(l, "lin2.w"), Tensor::uniform(d, d, (d as f64).powf(-0.5), rng), true)?;
        store.insert(param_name(l, "lin2.b"), Tensor::zeros(1, d), true)?;
        if config.edge_features {
            let bound = (EDGE_FEATURE_DIM as f64).powf(-0.5);
            store.insert(param_name(l, "edge.w"), Tensor::uniform(EDGE_FEATURE_DIM, d_in, bound, rng), true)?;
        }
    }
    Ok(())
}

/// The per-layer MLP for the standalone [`gin_layer`].
#[derive(Clone, Debug)]
pub enum GinMlp {
    Identity,
    Dense { w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor },
}

/// One GIN update on plain tensors, without edge features.
pub fn gin_layer(prev: &Tensor, graph: &MolecularGraph, mlp: &GinMlp, epsilon: f64) -> Result<Tensor, EncoderError> {
    if prev.rows() != graph.atom_count() {
        return Err(EncoderError::ShapeMismatch { expected: graph.atom_count(), got: prev.rows() });
    }
    let agg = prev.scale(1.0 + epsilon).add(&graph.adjacency().matmul(prev)?)?;
    Ok(match mlp {
        GinMlp::Identity => agg,
        GinMlp::Dense { w1, b1, w2, b2 } => {
            let h = agg.matmul(w1)?.add_row(b1)?.map(crate::numerics::silu);
            h.matmul(w2)?.add_row(b2)?
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerStack {
    pub levels: Vec<Tensor>,
}

impl LayerStack {
    pub fn layers(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.levels[0].rows()
    }
}

/// Constant inputs derived from one graph, recorded on a tape.
pub struct GraphInputs {
    pub features: Var,
    pub adjacency: Var,
    incidence_edges: Option<Var>,
}

impl GraphInputs {
    pub fn new(tape: &mut Tape, graph: &MolecularGraph, config: &GinConfig) -> Result<Self, EncoderError> {
        if graph.atom_count() == 0 {
            return Err(EncoderError::EmptyGraph);
        }
        if graph.node_features.cols() != config.input_dim {
            return Err(EncoderError::InvalidConfig(format!(
                "node features have width {}, config expects {}",
                graph.node_features.cols(),
                config.input_dim
            )));
        }
        let features = tape.leaf(graph.node_features.clone());
        let adjacency = tape.leaf(graph.adjacency());
        let incidence_edges = if config.edge_features {
            // atom × edge-feature sums over incident bonds
            Some(tape.leaf(graph.incidence().matmul(&graph.edge_features)?))
        } else {
            None
        };
        Ok(GraphInputs { features, adjacency, incidence_edges })
    }
}

/// Runs the encoder on a tape and returns the L+1 level handles.
pub fn encode_tape(
    tape: &mut Tape,
    store: &ParameterStore,
    config: &GinConfig,
    inputs: &GraphInputs,
) -> Result<Vec<Var>, EncoderError> {
    let mut levels = vec![inputs.features];
    let mut z = inputs.features;
    for l in 1..=config.layers {
        let eps = tape.param(store, &param_name(l, "eps"))?;
        let self_term = tape.mul_scalar(eps, z)?;
        let self_term = tape.add(z, self_term)?;
        let mut neigh = tape.matmul(inputs.adjacency, z)?;
        if let Some(ie) = inputs.incidence_edges {
            let we = tape.param(store, &param_name(l, "edge.w"))?;
            let msg = tape.matmul(ie, we)?;
            neigh = tape.add(neigh, msg)?;
        }
        let agg = tape.add(self_term, neigh)?;
        let w1 = tape.param(store, &param_name(l, "lin1.w"))?;
        let b1 = tape.param(store, &param_name(l, "lin1.b"))?;
        let w2 = tape.param(store, &param_name(l, "lin2.w"))?;
        let b2 = tape.param(store, &param_name(l, "lin2.b"))?;
        let h = tape.matmul(agg, w1)?;
        let h = tape.add_row(h, b1)?;
        let h = tape.silu(h);
        let h = tape.matmul(h, w2)?;
        z = tape.add_row(h, b2)?;
        levels.push(z);
    }
    Ok(levels)
}

pub fn encode(graph: &MolecularGraph, config: &GinConfig, store: &ParameterStore) -> Result<LayerStack, EncoderError> {
    let mut tape = Tape::new();
    let inputs = GraphInputs::new(&mut tape, graph, config)?;
    let levels = encode_tape(&mut tape, store, config, &inputs)?;
    Ok(LayerStack { levels: levels.into_iter().map(|v| tape.value(v).clone()).collect() })
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    match (na == 0.0, nb == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        // sqrt(fl(x·x)) == |x|, so parallel identical rows give exactly 0
        _ => 1.0 - (dot / (na * nb).sqrt()).clamp(-1.0, 1.0),
    }
}

/// Mean pairwise cosine distance among node rows.
pub fn mean_cosine_distance(level: &Tensor) -> Result<f64, EncoderError> {
    let n = level.rows();
    if n < 2 {
        return Err(EncoderError::SingleNodeGraph);
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += cosine_distance(level.row(i), level.row(j));
        }
    }
    Ok(total / (n * (n - 1) / 2) as f64)
}

/// One statistic per level, index 0 being the input features.
pub fn oversmoothing_stats(stack: &LayerStack) -> Result<Vec<f64>, EncoderError> {
    stack.levels.iter().map(mean_cosine_distance).collect()
}

/// `layer,mean_cosine_distance` rows for the requested levels.
pub fn oversmoothing_csv(stats: &[f64], layers: &[usize]) -> String {
    let mut out = String::from("layer,mean_cosine_distance\n");
    for &l in layers {
        if let Some(s) = stats.get(l) {
            let _ = writeln!(out, "{l},{s:.17e}");
        }
    }
    out
}

/// Node rows of one level as CSV (`node,f0,f1,...`).
pub fn level_csv(level: &Tensor) -> String {
    let mut out = String::from("node");
    for c in 0..level.cols() {
        let _ = write!(out, ",f{c}");
    }
    out.push('\n');
    for r in 0..level.rows() {
        let _ = write!(out, "{r}");
        for x in level.row(r) {
            let _ = write!(out, ",{x:.17e}");
        }
        out.push('\n');
    }
    out
}
