use molgraph::lm::Vocabulary;
use molgraph::pipeline::synthetic::caption_corpus;
use molgraph::pipeline::{
    load_model, save_model, train_stage1, train_stage2, Dataset, DatasetRecord, PipelineError, TrainingConfig,
};
use molgraph::{ModelConfig, MolGraphModel};

fn toy() -> Dataset {
    Dataset::from_records(caption_corpus(6, 2).into_iter().map(DatasetRecord::Sample))
}

fn short(stage: u8) -> TrainingConfig {
    let mut c = TrainingConfig::for_stage(stage).unwrap();
    c.total_steps = 3;
    c.warmup_steps = 1;
    c.lora_rank = 2;
    c
}

fn model(data: &Dataset) -> MolGraphModel {
    MolGraphModel::new(ModelConfig::new(data.vocabulary(), 2, 2, 16, 1)).unwrap()
}

#[test]
fn stage2_needs_stage1() {
    let data = toy();
    let mut m = model(&data);
    assert!(matches!(train_stage2(&data, &mut m, &short(2)), Err(PipelineError::MissingStage1Checkpoint)));
}

#[test]
fn stage1_checkpoint_feeds_stage2() {
    let data = toy();
    let mut m = model(&data);
    train_stage1(&data, &mut m, &short(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s1.ckpt");
    save_model(&m, &path).unwrap();

    let mut loaded = load_model(&path).unwrap();
    assert_eq!(loaded.completed_stage, 1);
    let turns = vec![("Describe the molecule.".to_string(), "x".to_string())];
    assert_eq!(m.loss("CCO", &turns).unwrap(), loaded.loss("CCO", &turns).unwrap());

    let report = train_stage2(&data, &mut loaded, &short(2)).unwrap();
    assert_eq!(report.stage, 2);
    assert_eq!(report.steps.len(), 3);
    assert!(!loaded.store.adapters().is_empty());

    // re-saving the loaded stage-2 model reproduces identical bytes
    let a = dir.path().join("a.ckpt");
    let b = dir.path().join("b.ckpt");
    save_model(&loaded, &a).unwrap();
    save_model(&load_model(&a).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn generation_is_deterministic() {
    let vocab = Vocabulary::from_corpus(["CCO", "Describe.", "abc"]);
    let m = MolGraphModel::new(ModelConfig::new(vocab, 2, 2, 16, 5)).unwrap();
    let a = m.generate("CCO", "Describe.", 12).unwrap();
    assert_eq!(a, m.generate("CCO", "Describe.", 12).unwrap());
    assert!(a.chars().count() <= 12);
}
