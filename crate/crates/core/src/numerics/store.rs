use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{NumericsError, Tensor};

/// Storage precision tag of a parameter. Arithmetic always runs in `f64`;
/// `F32` entries are rounded through `f32` whenever they are written.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F64,
    F32,
}

impl DType {
    pub fn byte_width(self) -> usize {
        match self {
            DType::F64 => 8,
            DType::F32 => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub tensor: Tensor,
    pub trainable: bool,
    pub dtype: DType,
}

/// Low-rank adapter bookkeeping for one adapted weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdapterSpec {
    pub rank: usize,
    pub alpha: f64,
}

impl AdapterSpec {
    pub fn scaling(&self) -> f64 {
        self.alpha / self.rank as f64
    }
}

/// Named parameters with trainable flags, in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    entries: IndexMap<String, Entry>,
    adapters: IndexMap<String, AdapterSpec>,
}

pub type Gradients = IndexMap<String, Tensor>;

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor, trainable: bool) -> Result<(), NumericsError> {
        self.insert_with_dtype(name, tensor, trainable, DType::F64)
    }

    pub fn insert_with_dtype(
        &mut self,
        name: impl Into<String>,
        tensor: Tensor,
        trainable: bool,
        dtype: DType,
    ) -> Result<(), NumericsError> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(NumericsError::DuplicateParameter(name));
        }
        if !tensor.is_finite() {
            return Err(NumericsError::NonFinite { op: "insert", index: 0 });
        }
        let tensor = round_to(tensor, dtype);
        self.entries.insert(name, Entry { tensor, trainable, dtype });
        Ok(())
    }

    pub fn remove(&mut self, name: &str) -> Option<Entry> {
        self.entries.shift_remove(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn entry(&self, name: &str) -> Result<&Entry, NumericsError> {
        self.entries
            .get(name)
            .ok_or_else(|| NumericsError::UnknownParameter(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, NumericsError> {
        self.entry(name).map(|e| &e.tensor)
    }

    pub fn is_trainable(&self, name: &str) -> bool {
        self.entries.get(name).is_some_and(|e| e.trainable)
    }

    /// Replaces the values of an existing entry. The shape is immutable.
    pub fn set(&mut self, name: &str, tensor: Tensor) -> Result<(), NumericsError> {
        let entry = self
            .entries
            .get_mut(name)
            .ok_or_else(|| NumericsError::UnknownParameter(name.to_string()))?;
        if entry.tensor.shape() != tensor.shape() {
            return Err(NumericsError::ShapeMismatch {
                op: "set",
                left: entry.tensor.shape(),
                right: tensor.shape(),
            });
        }
        entry.tensor = round_to(tensor, entry.dtype);
        Ok(())
    }

    pub fn set_trainable(&mut self, name: &str, trainable: bool) -> Result<(), NumericsError> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| NumericsError::UnknownParameter(name.to_string()))?
            .trainable = trainable;
        Ok(())
    }

    /// Sets the flag on every entry whose name starts with `prefix`; returns
    /// how many entries matched.
    pub fn set_trainable_prefix(&mut self, prefix: &str, trainable: bool) -> usize {
        let mut n = 0;
        for (name, e) in self.entries.iter_mut() {
            if name.starts_with(prefix) {
                e.trainable = trainable;
                n += 1;
            }
        }
        n
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Entry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn trainable_names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().filter(|(_, e)| e.trainable).map(|(k, _)| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn parameter_count(&self) -> usize {
        self.entries.values().map(|e| e.tensor.len()).sum()
    }

    pub fn adapters(&self) -> &IndexMap<String, AdapterSpec> {
        &self.adapters
    }

    pub fn adapter(&self, target: &str) -> Option<&AdapterSpec> {
        self.adapters.get(target)
    }

    pub(crate) fn adapters_mut(&mut self) -> &mut IndexMap<String, AdapterSpec> {
        &mut self.adapters
    }

    /// Retags every entry with `dtype`, rounding values accordingly.
    pub fn cast(&mut self, dtype: DType) {
        for e in self.entries.values_mut() {
            e.dtype = dtype;
            e.tensor = round_to(std::mem::replace(&mut e.tensor, Tensor::zeros(0, 0)), dtype);
        }
    }

    /// Copies of all tensors whose name starts with `prefix`.
    pub fn snapshot(&self, prefix: &str) -> IndexMap<String, Tensor> {
        self.entries
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(k, e)| (k.clone(), e.tensor.clone()))
            .collect()
    }
}

fn round_to(tensor: Tensor, dtype: DType) -> Tensor {
    match dtype {
        DType::F64 => tensor,
        DType::F32 => tensor.map(|v| v as f32 as f64),
    }
}
