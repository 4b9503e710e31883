use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::data::{Dataset, Task};
use super::optim::AdamW;
use super::schedule::{lr_at, TrainingConfig};
use super::PipelineError;
use crate::lm::{self, lora_attach, FusedSequence};
use crate::model::{Molecule, MolGraphModel};
use crate::numerics::{DType, Tape};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepLog {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    pub stage: u8,
    pub steps: Vec<StepLog>,
}

impl TrainReport {
    pub fn initial_loss(&self) -> Option<f64> {
        self.steps.first().map(|s| s.loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.steps.last().map(|s| s.loss)
    }
}

struct Prepared {
    molecule: Molecule,
    seq: FusedSequence,
    with_graph: bool,
}

fn prepare(model: &MolGraphModel, data: &Dataset, with_graph: bool) -> Result<Vec<Prepared>, PipelineError> {
    data.examples
        .iter()
        .map(|e| {
            let molecule = Molecule::parse(&e.smiles)?;
            let seq = if with_graph {
                model.sequence(&e.smiles, &molecule, &e.turns)
            } else {
                model.text_sequence(&e.smiles, &e.turns)
            };
            Ok(Prepared { molecule, seq, with_graph })
        })
        .collect()
}

/// Mean response NLL over a batch of examples, sequences right-padded to the
/// longest one.
pub fn batch_loss_value(model: &MolGraphModel, data: &Dataset) -> Result<f64, PipelineError> {
    let prepared = prepare(model, data, true)?;
    let refs: Vec<&Prepared> = prepared.iter().collect();
    let mut tape = Tape::new();
    let loss = record_batch(&mut tape, model, &refs)?;
    Ok(tape.value(loss).item())
}

fn record_batch(tape: &mut Tape, model: &MolGraphModel, batch: &[&Prepared]) -> Result<crate::numerics::Var, PipelineError> {
    let longest = batch.iter().map(|p| p.seq.len()).max().unwrap_or(0);
    let mut items = Vec::with_capacity(batch.len());
    for p in batch {
        let g = if p.with_graph { Some(model.graph_tokens_tape(tape, &p.molecule)?) } else { None };
        items.push((p.seq.padded(longest), g));
    }
    Ok(lm::batch_loss(tape, &model.store, &model.config.lm, &items)?)
}

fn run(
    model: &mut MolGraphModel,
    data: &Dataset,
    config: &TrainingConfig,
    with_graph: bool,
    on_step: &mut dyn FnMut(&StepLog),
) -> Result<TrainReport, PipelineError> {
    config.validate()?;
    if data.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    if model.store.trainable_names().next().is_none() {
        return Err(PipelineError::NoTrainableParams);
    }
    if config.dtype != DType::F64 {
        model.store.cast(config.dtype);
    }
    let prepared = prepare(model, data, with_graph)?;
    let per_epoch = prepared.len().div_ceil(config.batch_size);
    let mut schedule = config.clone();
    if schedule.total_steps == 0 {
        schedule.total_steps = config.epochs.max(1) * per_epoch;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = Vec::new();
    let mut opt = AdamW::new(config.beta1, config.beta2, config.adam_eps, config.weight_decay);
    let mut steps = Vec::with_capacity(schedule.total_steps);
    for step in 0..schedule.total_steps {
        if order.is_empty() {
            order = (0..prepared.len()).collect();
            order.shuffle(&mut rng);
            order.reverse();
        }
        let take = config.batch_size.min(order.len());
        let batch: Vec<&Prepared> = (0..take).map(|_| &prepared[order.pop().expect("non-empty")]).collect();

        let mut tape = Tape::new();
        let loss = record_batch(&mut tape, model, &batch)?;
        let grads = tape.gradients(loss, &model.store)?;
        let lr = lr_at(step, &schedule);
        opt.step(&mut model.store, &grads, lr)?;
        let log = StepLog { step, lr, loss: tape.value(loss).item() };
        on_step(&log);
        steps.push(log);
    }
    Ok(TrainReport { stage: config.stage, steps })
}

/// Sets the stage-1 trainable set: encoder and projector train, the decoder
/// is frozen.
pub fn freeze_for_stage1(model: &mut MolGraphModel) {
    model.store.set_trainable_prefix("lm.", false);
    model.store.set_trainable_prefix("gnn.", true);
    model.store.set_trainable_prefix("proj.", true);
    if !model.config.gnn.learn_epsilon {
        for l in 1..=model.config.gnn.layers {
            let _ = model.store.set_trainable(&crate::encoder::param_name(l, "eps"), false);
        }
    }
}

/// Sets the stage-2 trainable set: encoder frozen, projector trains, the
/// decoder trains only through freshly attached adapters.
pub fn prepare_stage2(model: &mut MolGraphModel, config: &TrainingConfig) -> Result<(), PipelineError> {
    if model.completed_stage < 1 {
        return Err(PipelineError::MissingStage1Checkpoint);
    }
    model.store.set_trainable_prefix("gnn.", false);
    model.store.set_trainable_prefix("proj.", true);
    model.store.set_trainable_prefix("lm.", false);
    if model.store.adapters().is_empty() {
        let targets = if config.lora_targets.is_empty() {
            model.config.lm.adapter_targets()
        } else {
            config.lora_targets.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x10_4a);
        lora_attach(&mut model.store, &targets, config.lora_rank, config.lora_alpha, &mut rng)?;
    }
    let targets: Vec<String> = model.store.adapters().keys().cloned().collect();
    for t in targets {
        model.store.set_trainable(&lm::lora::down_name(&t), true)?;
        model.store.set_trainable(&lm::lora::up_name(&t), true)?;
    }
    Ok(())
}

/// Text-only language-model training of the decoder (no graph segment);
/// encoder and projector are frozen. Stands in for the pretrained language
/// model that stage 1 starts from.
pub fn pretrain_decoder_with(
    data: &Dataset,
    model: &mut MolGraphModel,
    config: &TrainingConfig,
    on_step: &mut dyn FnMut(&StepLog),
) -> Result<TrainReport, PipelineError> {
    model.store.set_trainable_prefix("gnn.", false);
    model.store.set_trainable_prefix("proj.", false);
    model.store.set_trainable_prefix("lm.", true);
    let mut report = run(model, data, config, false, on_step)?;
    report.stage = 0;
    Ok(report)
}

pub fn train_stage1(data: &Dataset, model: &mut MolGraphModel, config: &TrainingConfig) -> Result<TrainReport, PipelineError> {
    train_stage1_with(data, model, config, &mut |_| {})
}

/// Stage 1 on the caption records of `data`.
pub fn train_stage1_with(
    data: &Dataset,
    model: &mut MolGraphModel,
    config: &TrainingConfig,
    on_step: &mut dyn FnMut(&StepLog),
) -> Result<TrainReport, PipelineError> {
    freeze_for_stage1(model);
    let captions = data.with_task(Task::Caption);
    let report = run(model, &captions, config, true, on_step)?;
    model.completed_stage = model.completed_stage.max(1);
    Ok(report)
}

pub fn train_stage2(data: &Dataset, model: &mut MolGraphModel, config: &TrainingConfig) -> Result<TrainReport, PipelineError> {
    train_stage2_with(data, model, config, &mut |_| {})
}

/// Stage 2 on every record of `data`.
pub fn train_stage2_with(
    data: &Dataset,
    model: &mut MolGraphModel,
    config: &TrainingConfig,
    on_step: &mut dyn FnMut(&StepLog),
) -> Result<TrainReport, PipelineError> {
    prepare_stage2(model, config)?;
    let report = run(model, data, config, true, on_step)?;
    model.completed_stage = 2;
    Ok(report)
}
