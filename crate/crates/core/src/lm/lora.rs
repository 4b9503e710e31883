use rand::Rng;

use super::LmError;
use crate::numerics::{AdapterSpec, ParameterStore, Tensor};

pub fn down_name(target: &str) -> String {
    format!("{target}.lora_down")
}

pub fn up_name(target: &str) -> String {
    format!("{target}.lora_up")
}

/// Attaches rank-`rank` adapters to each target weight `W` (`d_in × d_out`,
/// applied as `x·W`). The base is frozen; `down` (`d_in × r`) is random and
/// `up` (`r × d_out`) is zero, so the adapted forward starts out unchanged.
pub fn lora_attach<R: Rng>(
    store: &mut ParameterStore,
    targets: &[String],
    rank: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<(), LmError> {
    if rank == 0 {
        return Err(LmError::InvalidRank);
    }
    for t in targets {
        if !store.contains(t) {
            return Err(LmError::TargetNotFound(t.clone()));
        }
        if store.adapter(t).is_some() {
            return Err(LmError::AlreadyAdapted(t.clone()));
        }
    }
    for t in targets {
        let (d_in, d_out) = store.get(t)?.shape();
        store.set_trainable(t, false)?;
        let bound = (d_in as f64).powf(-0.5);
        store.insert(down_name(t), Tensor::uniform(d_in, rank, bound, rng), true)?;
        store.insert(up_name(t), Tensor::zeros(rank, d_out), true)?;
        store.adapters_mut().insert(t.clone(), AdapterSpec { rank, alpha });
    }
    Ok(())
}

/// Folds every adapter into its base, `W ← W + (α/r)·down·up`, and removes
/// the adapter tensors.
pub fn lora_merge(store: &mut ParameterStore) -> Result<(), LmError> {
    let adapters: Vec<(String, AdapterSpec)> = store.adapters().iter().map(|(k, v)| (k.clone(), *v)).collect();
    for (target, spec) in adapters {
        let down = store.get(&down_name(&target))?;
        let up = store.get(&up_name(&target))?;
        let delta = down.matmul(up)?.scale(spec.scaling());
        let merged = store.get(&target)?.add(&delta)?;
        store.set(&target, merged)?;
        store.remove(&down_name(&target));
        store.remove(&up_name(&target));
        store.adapters_mut().shift_remove(&target);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::decoder::{embed, forward_logits, init_params, LmConfig};
    use crate::lm::fuse::FusedSequence;
    use crate::numerics::Tape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn logits(store: &ParameterStore, config: &LmConfig) -> Tensor {
        let seq = FusedSequence::new(&[300, 301], 0, &[302], &[303, 2]);
        let mut tape = Tape::new();
        let x = embed(&mut tape, store, config, &seq, None).unwrap();
        let l = forward_logits(&mut tape, store, config, x).unwrap();
        tape.value(l).clone()
    }

    fn setup() -> (LmConfig, ParameterStore, ChaCha8Rng) {
        let config = LmConfig { max_positions: 32, ..LmConfig::new(310, 8) };
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        init_params(&config, &mut store, &mut rng).unwrap();
        (config, store, rng)
    }

    #[test]
    fn attach_is_identity_then_merge_matches() {
        let (config, mut store, mut rng) = setup();
        let before = logits(&store, &config);
        let targets = config.adapter_targets();
        lora_attach(&mut store, &targets, 2, 4.0, &mut rng).unwrap();
        assert!(logits(&store, &config).max_abs_diff(&before) <= 1e-12);
        assert!(!store.is_trainable("lm.block0.wq"));

        // pretend training moved the up factors
        for t in &targets {
            let shape = store.get(&up_name(t)).unwrap().shape();
            store.set(&up_name(t), Tensor::uniform(shape.0, shape.1, 0.1, &mut rng)).unwrap();
        }
        let adapted = logits(&store, &config);
        assert!(adapted.max_abs_diff(&before) > 1e-6);
        lora_merge(&mut store).unwrap();
        assert!(store.adapters().is_empty());
        assert!(!store.contains(&down_name(&targets[0])));
        assert!(logits(&store, &config).max_abs_diff(&adapted) <= 1e-10);
    }

    #[test]
    fn attach_errors() {
        let (_, mut store, mut rng) = setup();
        let missing = vec!["lm.block9.wq".to_string()];
        assert!(matches!(lora_attach(&mut store, &missing, 2, 2.0, &mut rng), Err(LmError::TargetNotFound(_))));
        let t = vec!["lm.block0.wq".to_string()];
        lora_attach(&mut store, &t, 2, 2.0, &mut rng).unwrap();
        assert!(matches!(lora_attach(&mut store, &t, 2, 2.0, &mut rng), Err(LmError::AlreadyAdapted(_))));
    }
}
