use indexmap::IndexMap;

use crate::numerics::{Gradients, NumericsError, ParameterStore, Tensor};

/// AdamW with decoupled weight decay. Moment buffers exist only for
/// parameters that have received a gradient while trainable.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    steps: i32,
    m: IndexMap<String, Tensor>,
    v: IndexMap<String, Tensor>,
}

impl AdamW {
    pub fn new(beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        AdamW { beta1, beta2, eps, weight_decay, steps: 0, m: IndexMap::new(), v: IndexMap::new() }
    }

    pub fn state_names(&self) -> impl Iterator<Item = &str> {
        self.m.keys().map(String::as_str)
    }

    pub fn step(&mut self, store: &mut ParameterStore, grads: &Gradients, lr: f64) -> Result<(), NumericsError> {
        self.steps += 1;
        let bc1 = 1.0 - self.beta1.powi(self.steps);
        let bc2 = 1.0 - self.beta2.powi(self.steps);
        for (name, g) in grads {
            if !store.is_trainable(name) {
                continue;
            }
            let w = store.get(name)?;
            let m = self.m.entry(name.clone()).or_insert_with(|| Tensor::zeros(g.rows(), g.cols()));
            let v = self.v.entry(name.clone()).or_insert_with(|| Tensor::zeros(g.rows(), g.cols()));
            let mut next = w.clone();
            for i in 0..g.len() {
                let gi = g.data()[i];
                let mi = self.beta1 * m.data()[i] + (1.0 - self.beta1) * gi;
                let vi = self.beta2 * v.data()[i] + (1.0 - self.beta2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let update = (mi / bc1) / ((vi / bc2).sqrt() + self.eps) + self.weight_decay * w.data()[i];
                next.data_mut()[i] -= lr * update;
            }
            store.set(name, next)?;
        }
        Ok(())
    }
}
