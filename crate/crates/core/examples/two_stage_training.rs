//! Toy two-stage run: decoder warm-up, graph-language alignment, then
//! instruction tuning with adapters. Writes a checkpoint between stages.

use molgraph::pipeline::synthetic::caption_corpus;
use molgraph::pipeline::train::batch_loss_value;
use molgraph::pipeline::{
    load_model, pretrain_decoder_with, save_model, train_stage1_with, train_stage2, Dataset, DatasetRecord,
    TrainingConfig,
};
use molgraph::{ModelConfig, MolGraphModel};

fn main() -> anyhow::Result<()> {
    let data = Dataset::from_records(caption_corpus(50, 0).into_iter().map(DatasetRecord::Sample));
    let mut model = MolGraphModel::new(ModelConfig::new(data.vocabulary(), 2, 4, 32, 0))?;

    pretrain_decoder_with(&data, &mut model, &TrainingConfig::decoder_pretraining(300), &mut |_| {})?;

    let mut stage1 = TrainingConfig::stage1();
    stage1.lr_init = 1e-2;
    stage1.lr_min = 1e-3;
    stage1.lr_warmup_start = 1e-4;
    stage1.warmup_steps = 20;
    stage1.total_steps = 200;
    stage1.batch_size = 8;
    let start = batch_loss_value(&model, &data)?;
    train_stage1_with(&data, &mut model, &stage1, &mut |log| {
        if log.step % 50 == 0 {
            println!("stage 1 step {:>3} lr {:.2e} loss {:.4}", log.step, log.lr, log.loss);
        }
    })?;
    println!("corpus loss {start:.4} -> {:.4}", batch_loss_value(&model, &data)?);

    let dir = std::env::temp_dir().join("molgraph-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("stage1.ckpt");
    save_model(&model, &path)?;
    let mut model = load_model(&path)?;

    let mut stage2 = stage1.clone();
    stage2.total_steps = 50;
    stage2.lora_rank = 4;
    let report = train_stage2(&data, &mut model, &stage2)?;
    println!("stage 2 loss {:.4} -> {:.4}", report.initial_loss().unwrap(), report.final_loss().unwrap());
    println!("{}", model.generate("CCO", "Describe the molecule.", 40)?);
    Ok(())
}
