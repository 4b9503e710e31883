use indexmap::IndexMap;

use super::tensor::{silu, silu_grad};
use super::{Gradients, NumericsError, ParameterStore, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    MulScalar { scalar: Var, x: Var },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceRows { x: Var, start: usize },
    GatherRows { table: Var, ids: Vec<usize> },
    Silu(Var),
    RowSoftmax(Var),
    CausalSoftmax(Var),
    Sum(Var),
    Nll { logits: Var, targets: Vec<(usize, usize)>, denom: f64, probs: Tensor },
}

impl Op {
    fn parents(&self) -> Vec<Var> {
        match self {
            Op::Leaf | Op::Param => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::AddRow(a, b) => vec![*a, *b],
            Op::MulScalar { scalar, x } => vec![*scalar, *x],
            Op::Transpose(a)
            | Op::Scale(a, _)
            | Op::Silu(a)
            | Op::RowSoftmax(a)
            | Op::CausalSoftmax(a)
            | Op::Sum(a)
            | Op::SliceRows { x: a, .. }
            | Op::GatherRows { table: a, .. }
            | Op::Nll { logits: a, .. } => vec![*a],
            Op::ConcatRows(v) | Op::ConcatCols(v) => v.clone(),
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records a forward computation for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and backward walks it in reverse.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: IndexMap<String, Var>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let needs_grad = match &op {
            Op::Leaf => false,
            Op::Param => unreachable!("params are pushed by bind"),
            other => other.parents().iter().any(|p| self.nodes[p.0].needs_grad),
        };
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// A constant input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Binds a stored parameter. Binding the same name twice returns the same
    /// handle, so gradients from every use accumulate in one place.
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Result<Var, NumericsError> {
        if let Some(v) = self.params.get(name) {
            return Ok(*v);
        }
        let entry = store.entry(name)?;
        self.nodes.push(Node {
            value: entry.tensor.clone(),
            op: Op::Param,
            needs_grad: entry.trainable,
        });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn bound_params(&self) -> impl Iterator<Item = (&str, Var)> {
        self.params.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    /// `x + 1ᵀ·bias` for a `1 × cols` bias.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var, NumericsError> {
        let v = self.value(x).add_row(self.value(bias))?;
        Ok(self.push(v, Op::AddRow(x, bias)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).scale(c);
        self.push(v, Op::Scale(a, c))
    }

    /// Multiplies `x` by a `1 × 1` variable.
    pub fn mul_scalar(&mut self, scalar: Var, x: Var) -> Result<Var, NumericsError> {
        let s = self.value(scalar);
        if s.shape() != (1, 1) {
            return Err(NumericsError::ShapeMismatch {
                op: "mul_scalar",
                left: s.shape(),
                right: self.value(x).shape(),
            });
        }
        let v = self.value(x).scale(s.item());
        Ok(self.push(v, Op::MulScalar { scalar, x }))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let tensors: Vec<&Tensor> = parts.iter().map(|p| self.value(*p)).collect();
        let v = Tensor::concat_rows(&tensors)?;
        Ok(self.push(v, Op::ConcatRows(parts.to_vec())))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let tensors: Vec<&Tensor> = parts.iter().map(|p| self.value(*p)).collect();
        let v = Tensor::concat_cols(&tensors)?;
        Ok(self.push(v, Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var, NumericsError> {
        let v = self.value(x).slice_rows(start, len)?;
        Ok(self.push(v, Op::SliceRows { x, start }))
    }

    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var, NumericsError> {
        let v = self.value(table).gather_rows(ids)?;
        Ok(self.push(v, Op::GatherRows { table, ids: ids.to_vec() }))
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(silu);
        self.push(v, Op::Silu(a))
    }

    pub fn row_softmax(&mut self, a: Var) -> Var {
        let v = self.value(a).row_softmax();
        self.push(v, Op::RowSoftmax(a))
    }

    /// Softmax over columns `0..=r` of each row `r`; later columns get weight 0.
    pub fn causal_softmax(&mut self, a: Var) -> Var {
        let v = self.value(a).causal_softmax();
        self.push(v, Op::CausalSoftmax(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    /// `Σ −log softmax(logits[row])[target] / denom` over `(row, target)` pairs.
    pub fn nll(&mut self, logits: Var, targets: &[(usize, usize)], denom: f64) -> Result<Var, NumericsError> {
        let l = self.value(logits);
        for &(r, t) in targets {
            if r >= l.rows() || t >= l.cols() {
                return Err(NumericsError::IndexOutOfRange { op: "nll", index: r.max(t), len: l.rows() });
            }
        }
        let probs = l.row_softmax();
        let mut total = 0.0;
        for &(r, t) in targets {
            let row = l.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[t];
        }
        let v = Tensor::scalar(total / denom);
        Ok(self.push(
            v,
            Op::Nll { logits, targets: targets.to_vec(), denom, probs },
        ))
    }

    /// Gradients of a scalar `loss` with respect to every node.
    fn backward_all(&self, loss: Var) -> Result<Vec<Option<Tensor>>, NumericsError> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(NumericsError::NonScalarLoss { shape });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            for p in node.op.parents() {
                if p.0 >= idx {
                    return Err(NumericsError::GraphCycle);
                }
            }
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(grads)
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<(), NumericsError> {
        let node = &self.nodes[idx];
        let mut acc = |v: Var, delta: Tensor| -> Result<(), NumericsError> {
            if !self.nodes[v.0].needs_grad {
                return Ok(());
            }
            let slot = &mut grads[v.0];
            *slot = Some(match slot.take() {
                Some(prev) => prev.add(&delta)?,
                None => delta,
            });
            Ok(())
        };
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.nodes[a.0].needs_grad {
                    acc(*a, g.matmul(&bv.transpose())?)?;
                }
                if self.nodes[b.0].needs_grad {
                    acc(*b, av.transpose().matmul(g)?)?;
                }
            }
            Op::Transpose(a) => acc(*a, g.transpose())?,
            Op::Add(a, b) => {
                acc(*a, g.clone())?;
                acc(*b, g.clone())?;
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone())?;
                acc(*b, g.scale(-1.0))?;
            }
            Op::AddRow(x, bias) => {
                acc(*x, g.clone())?;
                let mut col = vec![0.0; g.cols()];
                for r in 0..g.rows() {
                    for (c, v) in g.row(r).iter().enumerate() {
                        col[c] += v;
                    }
                }
                acc(*bias, Tensor::raw(1, g.cols(), col))?;
            }
            Op::Scale(a, c) => acc(*a, g.scale(*c))?,
            Op::MulScalar { scalar, x } => {
                let s = self.value(*scalar).item();
                let xv = self.value(*x);
                let ds: f64 = g.data().iter().zip(xv.data()).map(|(a, b)| a * b).sum();
                acc(*scalar, Tensor::scalar(ds))?;
                acc(*x, g.scale(s))?;
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for p in parts {
                    let rows = self.value(*p).rows();
                    acc(*p, g.slice_rows(start, rows)?)?;
                    start += rows;
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let (rows, cols) = self.value(*p).shape();
                    let mut d = Vec::with_capacity(rows * cols);
                    for r in 0..rows {
                        d.extend_from_slice(&g.row(r)[offset..offset + cols]);
                    }
                    acc(*p, Tensor::raw(rows, cols, d))?;
                    offset += cols;
                }
            }
            Op::SliceRows { x, start } => {
                let (rows, cols) = self.value(*x).shape();
                let mut d = Tensor::zeros(rows, cols);
                d.data_mut()[start * cols..start * cols + g.len()].copy_from_slice(g.data());
                acc(*x, d)?;
            }
            Op::GatherRows { table, ids } => {
                let (rows, cols) = self.value(*table).shape();
                let mut d = Tensor::zeros(rows, cols);
                for (i, &id) in ids.iter().enumerate() {
                    let src = g.row(i);
                    for (o, v) in d.data_mut()[id * cols..(id + 1) * cols].iter_mut().zip(src) {
                        *o += v;
                    }
                }
                acc(*table, d)?;
            }
            Op::Silu(a) => {
                let xv = self.value(*a);
                let d = g.zip_grad(xv, |gv, x| gv * silu_grad(x));
                acc(*a, d)?;
            }
            Op::RowSoftmax(a) | Op::CausalSoftmax(a) => {
                let y = &node.value;
                let mut d = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for c in 0..y.cols() {
                        d.set(r, c, yr[c] * (gr[c] - dot));
                    }
                }
                acc(*a, d)?;
            }
            Op::Sum(a) => {
                let (rows, cols) = self.value(*a).shape();
                acc(*a, Tensor::filled(rows, cols, g.item()))?;
            }
            Op::Nll { logits, targets, denom, probs } => {
                let (rows, cols) = probs.shape();
                let mut d = Tensor::zeros(rows, cols);
                let scale = g.item() / denom;
                for &(r, t) in targets {
                    for c in 0..cols {
                        let v = d.get(r, c) + scale * probs.get(r, c);
                        d.set(r, c, v);
                    }
                    let v = d.get(r, t) - scale;
                    d.set(r, t, v);
                }
                acc(*logits, d)?;
            }
        }
        Ok(())
    }

    /// Gradients for every trainable entry of `store`.
    ///
    /// Entries bound on this tape get their accumulated gradient; trainable
    /// entries the loss does not reach get zeros; frozen entries are absent.
    pub fn gradients(&self, loss: Var, store: &ParameterStore) -> Result<Gradients, NumericsError> {
        let mut all = self.backward_all(loss)?;
        let mut out = Gradients::new();
        for (name, entry) in store.iter() {
            if !entry.trainable {
                continue;
            }
            let (r, c) = entry.tensor.shape();
            let g = self
                .params
                .get(name)
                .filter(|v| v.0 <= loss.0)
                .and_then(|v| all[v.0].take())
                .unwrap_or_else(|| Tensor::zeros(r, c));
            out.insert(name.to_string(), g);
        }
        Ok(out)
    }

    /// Gradient of `loss` with respect to an arbitrary recorded variable.
    pub fn grad_of(&self, loss: Var, wrt: Var) -> Result<Tensor, NumericsError> {
        let (r, c) = self.value(wrt).shape();
        if wrt.0 > loss.0 {
            return Ok(Tensor::zeros(r, c));
        }
        let mut all = self.backward_all(loss)?;
        Ok(all[wrt.0].take().unwrap_or_else(|| Tensor::zeros(r, c)))
    }

    /// Marks a constant so that [`Tape::grad_of`] can report its gradient.
    pub fn watch(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, needs_grad: true });
        Var(self.nodes.len() - 1)
    }
}

impl Tensor {
    fn zip_grad(&self, x: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        Tensor::raw(
            self.rows(),
            self.cols(),
            self.data().iter().zip(x.data()).map(|(g, x)| f(*g, *x)).collect(),
        )
    }
}
