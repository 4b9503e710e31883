use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fuse::{FusedSequence, Slot};
use super::vocab::EOS;
use super::LmError;
use crate::numerics::{ParameterStore, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub vocab_size: usize,
    pub width: usize,
    pub blocks: usize,
    pub mlp_hidden: usize,
    pub max_positions: usize,
}

impl LmConfig {
    pub fn new(vocab_size: usize, width: usize) -> Self {
        LmConfig { vocab_size, width, blocks: 2, mlp_hidden: 2 * width, max_positions: 512 }
    }

    /// Linear maps eligible for low-rank adapters.
    pub fn adapter_targets(&self) -> Vec<String> {
        (0..self.blocks)
            .flat_map(|i| {
                ["wq", "wk", "wv", "wo", "mlp.w1", "mlp.w2"].map(move |p| format!("lm.block{i}.{p}"))
            })
            .collect()
    }
}

pub fn init_params<R: Rng>(config: &LmConfig, store: &mut ParameterStore, rng: &mut R) -> Result<(), LmError> {
    let d = config.width;
    let bound = (d as f64).powf(-0.5);
    store.insert("lm.tok_emb", Tensor::uniform(config.vocab_size, d, 1.0, rng), true)?;
    store.insert("lm.pos_emb", Tensor::uniform(config.max_positions, d, 1.0, rng), true)?;
    for i in 0..config.blocks {
        for p in ["wq", "wk", "wv", "wo"] {
            store.insert(format!("lm.block{i}.{p}"), Tensor::uniform(d, d, bound, rng), true)?;
        }
        let h = config.mlp_hidden;
        store.insert(format!("lm.block{i}.mlp.w1"), Tensor::uniform(d, h, bound, rng), true)?;
        store.insert(format!("lm.block{i}.mlp.b1"), Tensor::zeros(1, h), true)?;
        store.insert(format!("lm.block{i}.mlp.w2"), Tensor::uniform(h, d, (h as f64).powf(-0.5), rng), true)?;
        store.insert(format!("lm.block{i}.mlp.b2"), Tensor::zeros(1, d), true)?;
    }
    store.insert("lm.head.w", Tensor::uniform(d, config.vocab_size, bound, rng), true)?;
    store.insert("lm.head.b", Tensor::zeros(1, config.vocab_size), true)?;
    Ok(())
}

/// `x·W`, plus `(α/r)·(x·down)·up` when `name` carries an adapter.
pub fn linear(tape: &mut Tape, store: &ParameterStore, name: &str, x: Var) -> Result<Var, LmError> {
    let w = tape.param(store, name)?;
    let y = tape.matmul(x, w)?;
    let Some(spec) = store.adapter(name) else { return Ok(y) };
    let down = tape.param(store, &format!("{name}.lora_down"))?;
    let up = tape.param(store, &format!("{name}.lora_up"))?;
    let h = tape.matmul(x, down)?;
    let h = tape.matmul(h, up)?;
    let h = tape.scale(h, spec.scaling());
    Ok(tape.add(y, h)?)
}

/// Input embeddings: token rows from `lm.tok_emb`, graph rows spliced from
/// `graph`, plus learned positions.
pub fn embed(
    tape: &mut Tape,
    store: &ParameterStore,
    config: &LmConfig,
    seq: &FusedSequence,
    graph: Option<Var>,
) -> Result<Var, LmError> {
    let n = seq.len();
    if n > config.max_positions {
        return Err(LmError::SequenceTooLong { len: n, max: config.max_positions });
    }
    if seq.graph_rows > 0 {
        let g = graph.ok_or(LmError::MissingGraph)?;
        let (rows, cols) = tape.value(g).shape();
        if cols != config.width {
            return Err(LmError::WidthMismatch { expected: config.width, got: cols });
        }
        if rows != seq.graph_rows {
            return Err(LmError::GraphRowMismatch { expected: seq.graph_rows, got: rows });
        }
    }
    let table = tape.param(store, "lm.tok_emb")?;
    let mut parts = Vec::new();
    let mut i = 0;
    while i < n {
        match seq.slots[i] {
            Slot::Token(_) => {
                let mut ids = Vec::new();
                while let Some(Slot::Token(id)) = seq.slots.get(i) {
                    ids.push(*id);
                    i += 1;
                }
                parts.push(tape.gather_rows(table, &ids)?);
            }
            Slot::Graph(start) => {
                let mut len = 0;
                while let Some(Slot::Graph(_)) = seq.slots.get(i) {
                    len += 1;
                    i += 1;
                }
                parts.push(tape.slice_rows(graph.ok_or(LmError::MissingGraph)?, start, len)?);
            }
        }
    }
    let x = tape.concat_rows(&parts)?;
    let pos_table = tape.param(store, "lm.pos_emb")?;
    let positions: Vec<usize> = (0..n).collect();
    let pos = tape.gather_rows(pos_table, &positions)?;
    Ok(tape.add(x, pos)?)
}

/// Causal decoder over embedded inputs; returns `n × vocab` logits.
pub fn forward_logits(tape: &mut Tape, store: &ParameterStore, config: &LmConfig, x: Var) -> Result<Var, LmError> {
    let mut h = x;
    let scale = (config.width as f64).powf(-0.5);
    for i in 0..config.blocks {
        let p = format!("lm.block{i}");
        let q = linear(tape, store, &format!("{p}.wq"), h)?;
        let k = linear(tape, store, &format!("{p}.wk"), h)?;
        let v = linear(tape, store, &format!("{p}.wv"), h)?;
        let kt = tape.transpose(k);
        let scores = tape.matmul(q, kt)?;
        let scores = tape.scale(scores, scale);
        let weights = tape.causal_softmax(scores);
        let attn = tape.matmul(weights, v)?;
        let attn = linear(tape, store, &format!("{p}.wo"), attn)?;
        h = tape.add(h, attn)?;

        let b1 = tape.param(store, &format!("{p}.mlp.b1"))?;
        let b2 = tape.param(store, &format!("{p}.mlp.b2"))?;
        let m = linear(tape, store, &format!("{p}.mlp.w1"), h)?;
        let m = tape.add_row(m, b1)?;
        let m = tape.silu(m);
        let m = linear(tape, store, &format!("{p}.mlp.w2"), m)?;
        let m = tape.add_row(m, b2)?;
        h = tape.add(h, m)?;
    }
    let w = tape.param(store, "lm.head.w")?;
    let b = tape.param(store, "lm.head.b")?;
    let logits = tape.matmul(h, w)?;
    Ok(tape.add_row(logits, b)?)
}

/// `(row, target)` pairs: each masked position is predicted from the row
/// before it.
pub fn loss_targets(seq: &FusedSequence) -> Vec<(usize, usize)> {
    seq.loss_mask
        .iter()
        .enumerate()
        .filter(|(p, m)| **m && *p > 0)
        .filter_map(|(p, _)| match seq.slots[p] {
            Slot::Token(id) => Some((p - 1, id)),
            Slot::Graph(_) => None,
        })
        .collect()
}

/// Mean negative log-likelihood of the response tokens.
pub fn forward_loss(
    tape: &mut Tape,
    store: &ParameterStore,
    config: &LmConfig,
    seq: &FusedSequence,
    graph: Option<Var>,
) -> Result<Var, LmError> {
    let targets = loss_targets(seq);
    if targets.is_empty() {
        return Err(LmError::EmptyResponse);
    }
    let x = embed(tape, store, config, seq, graph)?;
    let logits = forward_logits(tape, store, config, x)?;
    let denom = targets.len() as f64;
    Ok(tape.nll(logits, &targets, denom)?)
}

/// Summed NLL over several sequences divided by their total target count.
pub fn batch_loss(
    tape: &mut Tape,
    store: &ParameterStore,
    config: &LmConfig,
    batch: &[(FusedSequence, Option<Var>)],
) -> Result<Var, LmError> {
    let total: usize = batch.iter().map(|(s, _)| loss_targets(s).len()).sum();
    if total == 0 {
        return Err(LmError::EmptyResponse);
    }
    let mut acc: Option<Var> = None;
    for (seq, graph) in batch {
        let targets = loss_targets(seq);
        if targets.is_empty() {
            continue;
        }
        let x = embed(tape, store, config, seq, *graph)?;
        let logits = forward_logits(tape, store, config, x)?;
        let l = tape.nll(logits, &targets, total as f64)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, l)?,
            None => l,
        });
    }
    Ok(acc.expect("at least one sequence has targets"))
}

fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Greedy decoding from a prefix that ends before the response. Stops at
/// EOS (not returned), `max_len` tokens, or the position limit.
pub fn generate(
    store: &ParameterStore,
    config: &LmConfig,
    prefix: &FusedSequence,
    graph: Option<&Tensor>,
    max_len: usize,
) -> Result<Vec<usize>, LmError> {
    let mut seq = prefix.clone();
    let mut out = Vec::new();
    while out.len() < max_len && seq.len() < config.max_positions {
        let mut tape = Tape::new();
        let g = graph.map(|t| tape.leaf(t.clone()));
        let x = embed(&mut tape, store, config, &seq, g)?;
        let logits = forward_logits(&mut tape, store, config, x)?;
        let values = tape.value(logits);
        let next = argmax_lowest(values.row(values.rows() - 1));
        if next == EOS {
            break;
        }
        out.push(next);
        seq.push_response_token(next);
    }
    Ok(out)
}
