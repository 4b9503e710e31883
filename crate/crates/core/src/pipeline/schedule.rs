use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::PipelineError;
use crate::numerics::DType;

pub const SEED_ENV: &str = "MOLGRAPH_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub stage: u8,
    pub lr_init: f64,
    pub lr_min: f64,
    pub lr_warmup_start: f64,
    pub warmup_steps: usize,
    /// Optimizer steps; 0 derives `epochs × batches per epoch`.
    pub total_steps: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub adam_eps: f64,
    pub lora_rank: usize,
    pub lora_alpha: f64,
    /// Adapter targets for stage 2; empty means every decoder linear map.
    pub lora_targets: Vec<String>,
    /// Storage precision of the trained parameters.
    pub dtype: DType,
}

impl TrainingConfig {
    pub fn stage1() -> Self {
        TrainingConfig {
            stage: 1,
            lr_init: 1e-4,
            lr_min: 1e-5,
            lr_warmup_start: 1e-6,
            warmup_steps: 1000,
            total_steps: 0,
            epochs: 1,
            batch_size: 4,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 0.01,
            adam_eps: 1e-8,
            lora_rank: 8,
            lora_alpha: 16.0,
            lora_targets: Vec::new(),
            dtype: DType::F64,
        }
    }

    pub fn stage2() -> Self {
        TrainingConfig { stage: 2, lr_init: 5e-5, lr_min: 5e-6, lr_warmup_start: 5e-7, ..Self::stage1() }
    }

    /// Text-only decoder pretraining over `steps` steps: lr 1e-2 decaying to
    /// 1e-3 after a 20-step warmup from 1e-4, batch 8.
    pub fn decoder_pretraining(steps: usize) -> Self {
        TrainingConfig {
            lr_init: 1e-2,
            lr_min: 1e-3,
            lr_warmup_start: 1e-4,
            warmup_steps: 20,
            total_steps: steps,
            batch_size: 8,
            ..Self::stage1()
        }
    }

    pub fn for_stage(stage: u8) -> Result<Self, PipelineError> {
        match stage {
            1 => Ok(Self::stage1()),
            2 => Ok(Self::stage2()),
            s => Err(PipelineError::InvalidConfig(format!("stage must be 1 or 2, got {s}"))),
        }
    }

    /// Parses a JSON document; keys not present take the defaults of the
    /// document's `stage` (or `default_stage`).
    pub fn from_json(text: &str, default_stage: u8) -> Result<Self, PipelineError> {
        let doc: Value = serde_json::from_str(text)?;
        let Value::Object(overrides) = doc else {
            return Err(PipelineError::InvalidConfig("config must be a JSON object".into()));
        };
        let stage = match overrides.get("stage") {
            Some(v) => v
                .as_u64()
                .ok_or_else(|| PipelineError::InvalidConfig("stage must be an integer".into()))? as u8,
            None => default_stage,
        };
        let mut base = serde_json::to_value(Self::for_stage(stage)?)?;
        let obj = base.as_object_mut().expect("config serializes to an object");
        for (k, v) in overrides {
            if !obj.contains_key(&k) {
                return Err(PipelineError::InvalidConfig(format!("unknown config key `{k}`")));
            }
            obj.insert(k, v);
        }
        let config: Self = serde_json::from_value(base)?;
        config.validate()?;
        Ok(config)
    }

    /// Applies `MOLGRAPH_SEED` when set.
    pub fn apply_env(&mut self) -> Result<(), PipelineError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| PipelineError::InvalidConfig(format!("{SEED_ENV} must be an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.lr_warmup_start <= self.lr_min && self.lr_min <= self.lr_init) {
            return Err(PipelineError::InvalidConfig(
                "learning rates must satisfy warmup_start <= min <= init".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(PipelineError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.stage == 2 && self.lora_rank == 0 {
            return Err(PipelineError::InvalidConfig("lora_rank must be at least 1".into()));
        }
        Ok(())
    }
}

/// Linear warmup from `lr_warmup_start` to `lr_init`, then cosine decay to
/// `lr_min`, reached exactly at step `total_steps − 1`.
pub fn lr_at(step: usize, config: &TrainingConfig) -> f64 {
    let (start, init, min) = (config.lr_warmup_start, config.lr_init, config.lr_min);
    let warmup = config.warmup_steps;
    if step < warmup {
        let t = step as f64 / warmup as f64;
        return start * (1.0 - t) + init * t;
    }
    let last = config.total_steps.saturating_sub(1);
    let span = last.saturating_sub(warmup);
    if step == warmup && (span > 0 || last < warmup) {
        return init;
    }
    if span == 0 || step >= last {
        return min;
    }
    let p = (step - warmup) as f64 / span as f64;
    let w = 0.5 * (1.0 + (std::f64::consts::PI * p).cos());
    (init - (init - min) * (1.0 - w)).max(min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn with_total(mut c: TrainingConfig, total: usize) -> TrainingConfig {
        c.total_steps = total;
        c
    }

    #[test]
    fn stage_constants() {
        let c = with_total(TrainingConfig::stage1(), 5000);
        assert_eq!(lr_at(0, &c), 1e-6);
        assert_eq!(lr_at(1000, &c), 1e-4);
        assert_eq!(lr_at(4999, &c), 1e-5);
        let c = with_total(TrainingConfig::stage2(), 3000);
        assert_eq!(lr_at(0, &c), 5e-7);
        assert_eq!(lr_at(1000, &c), 5e-5);
        assert_eq!(lr_at(2999, &c), 5e-6);
    }

    #[test]
    fn json_overrides_keep_stage_defaults() {
        let c = TrainingConfig::from_json(r#"{"stage": 2, "batch_size": 2}"#, 1).unwrap();
        assert_eq!(c.lr_init, 5e-5);
        assert_eq!(c.batch_size, 2);
        assert!(TrainingConfig::from_json(r#"{"bogus": 1}"#, 1).is_err());
        assert!(TrainingConfig::from_json(r#"{"lr_min": 1.0}"#, 1).is_err());
    }

    proptest! {
        #[test]
        fn monotone_after_warmup(total in 1002usize..20000, a in 0usize..20000, b in 0usize..20000) {
            let c = with_total(TrainingConfig::stage1(), total);
            let (lo, hi) = (a.min(b).max(1000), a.max(b).max(1000));
            prop_assert!(lr_at(hi, &c) <= lr_at(lo, &c));
            prop_assert!(lr_at(hi, &c) >= c.lr_min);
        }

        #[test]
        fn warmup_is_increasing(step in 0usize..999) {
            let c = with_total(TrainingConfig::stage1(), 5000);
            prop_assert!(lr_at(step + 1, &c) >= lr_at(step, &c));
        }
    }
}
