//! Checkpoint layout: the 6-byte magic `LLAMO1`, the manifest length as a
//! little-endian u64, a JSON manifest, then every tensor's values as
//! little-endian IEEE-754 numbers at the manifest's byte offsets.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::PipelineError;
use crate::model::{ModelConfig, MolGraphModel};
use crate::numerics::{AdapterSpec, DType, ParameterStore, Tensor};

pub const MAGIC: &[u8; 6] = b"LLAMO1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub dtype: DType,
    pub offset: usize,
    pub trainable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: Value,
    pub tensors: Vec<TensorRecord>,
    pub adapters: IndexMap<String, AdapterSpec>,
}

pub fn encode_checkpoint(store: &ParameterStore, config: &Value) -> Result<Vec<u8>, PipelineError> {
    let mut payload = Vec::new();
    let mut tensors = Vec::new();
    for (name, entry) in store.iter() {
        let (rows, cols) = entry.tensor.shape();
        tensors.push(TensorRecord {
            name: name.to_string(),
            shape: [rows, cols],
            dtype: entry.dtype,
            offset: payload.len(),
            trainable: entry.trainable,
        });
        for &x in entry.tensor.data() {
            match entry.dtype {
                DType::F64 => payload.extend_from_slice(&x.to_le_bytes()),
                DType::F32 => payload.extend_from_slice(&(x as f32).to_le_bytes()),
            }
        }
    }
    let manifest = Manifest { config: config.clone(), tensors, adapters: store.adapters().clone() };
    let json = serde_json::to_vec(&manifest)?;
    let mut out = Vec::with_capacity(MAGIC.len() + 8 + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ParameterStore, Value), PipelineError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(PipelineError::BadMagic);
    }
    let header_end = MAGIC.len() + 8;
    if bytes.len() < header_end {
        return Err(PipelineError::TruncatedPayload { expected: header_end, got: bytes.len() });
    }
    let len = u64::from_le_bytes(bytes[MAGIC.len()..header_end].try_into().expect("8 bytes")) as usize;
    let json_end = header_end
        .checked_add(len)
        .ok_or_else(|| PipelineError::ManifestMismatch("manifest length overflows".into()))?;
    if bytes.len() < json_end {
        return Err(PipelineError::TruncatedPayload { expected: json_end, got: bytes.len() });
    }
    let manifest: Manifest = serde_json::from_slice(&bytes[header_end..json_end])?;
    let payload = &bytes[json_end..];

    let mut expected_offset = 0;
    let mut store = ParameterStore::new();
    for t in &manifest.tensors {
        if t.offset != expected_offset {
            return Err(PipelineError::ManifestMismatch(format!("`{}` starts at {}, expected {}", t.name, t.offset, expected_offset)));
        }
        let count = t.shape[0] * t.shape[1];
        let width = t.dtype.byte_width();
        let end = t.offset + count * width;
        if payload.len() < end {
            return Err(PipelineError::TruncatedPayload { expected: json_end + end, got: bytes.len() });
        }
        let data: Vec<f64> = payload[t.offset..end]
            .chunks_exact(width)
            .map(|c| match t.dtype {
                DType::F64 => f64::from_le_bytes(c.try_into().expect("8 bytes")),
                DType::F32 => f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64,
            })
            .collect();
        let tensor = Tensor::from_vec(t.shape[0], t.shape[1], data)?;
        store.insert_with_dtype(t.name.clone(), tensor, t.trainable, t.dtype)?;
        expected_offset = end;
    }
    if expected_offset != payload.len() {
        return Err(PipelineError::ManifestMismatch(format!(
            "manifest describes {} payload bytes, file has {}",
            expected_offset,
            payload.len()
        )));
    }
    for (target, spec) in manifest.adapters {
        if !store.contains(&target) {
            return Err(PipelineError::ManifestMismatch(format!("adapter target `{target}` has no tensor")));
        }
        store.adapters_mut().insert(target, spec);
    }
    Ok((store, manifest.config))
}

pub fn save_checkpoint(store: &ParameterStore, config: &Value, path: &Path) -> Result<(), PipelineError> {
    std::fs::write(path, encode_checkpoint(store, config)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ParameterStore, Value), PipelineError> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[derive(Serialize, Deserialize)]
struct ModelSnapshot {
    model: ModelConfig,
    completed_stage: u8,
}

pub fn save_model(model: &MolGraphModel, path: &Path) -> Result<(), PipelineError> {
    let snapshot = ModelSnapshot { model: model.config.clone(), completed_stage: model.completed_stage };
    save_checkpoint(&model.store, &serde_json::to_value(snapshot)?, path)
}

pub fn load_model(path: &Path) -> Result<MolGraphModel, PipelineError> {
    let (store, config) = load_checkpoint(path)?;
    let snapshot: ModelSnapshot = serde_json::from_value(config)
        .map_err(|e| PipelineError::ManifestMismatch(format!("config snapshot: {e}")))?;
    let model = MolGraphModel { config: snapshot.model, store, completed_stage: snapshot.completed_stage };
    // every initialized parameter must be present with the same shape
    let fresh = MolGraphModel::new(model.config.clone())?;
    for (name, e) in fresh.store.iter() {
        let got = model
            .store
            .get(name)
            .map_err(|_| PipelineError::ManifestMismatch(format!("missing tensor `{name}`")))?;
        if got.shape() != e.tensor.shape() {
            return Err(PipelineError::ManifestMismatch(format!("tensor `{name}` has the wrong shape")));
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParameterStore {
        let mut s = ParameterStore::new();
        s.insert("a", Tensor::from_vec(2, 2, vec![1.0, -2.5, 1e-300, 3.25]).unwrap(), true).unwrap();
        s.insert_with_dtype("b", Tensor::from_vec(1, 3, vec![0.1, 0.2, 0.3]).unwrap(), false, DType::F32).unwrap();
        s
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let cfg = serde_json::json!({"note": "x"});
        let bytes = encode_checkpoint(&store(), &cfg).unwrap();
        let (back, c) = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back, store());
        assert_eq!(c, cfg);
        assert_eq!(encode_checkpoint(&back, &c).unwrap(), bytes);
    }

    #[test]
    fn errors() {
        let cfg = Value::Null;
        let bytes = encode_checkpoint(&store(), &cfg).unwrap();
        assert!(matches!(decode_checkpoint(b"NOTCKPT00000000"), Err(PipelineError::BadMagic)));
        assert!(matches!(
            decode_checkpoint(&bytes[..bytes.len() - 3]),
            Err(PipelineError::TruncatedPayload { .. })
        ));
        let mut extra = bytes.clone();
        extra.extend_from_slice(&[0; 8]);
        assert!(matches!(decode_checkpoint(&extra), Err(PipelineError::ManifestMismatch(_))));

        // shrink a declared shape so the manifest no longer covers the payload
        let start = bytes.windows(5).position(|w| w == b"[2,2]").unwrap();
        let mut bad = bytes.clone();
        bad[start..start + 5].copy_from_slice(b"[1,2]");
        let r = decode_checkpoint(&bad);
        assert!(matches!(r, Err(PipelineError::ManifestMismatch(_))), "{r:?}");
    }
}
