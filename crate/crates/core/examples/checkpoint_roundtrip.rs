//! Save a model, inspect the checkpoint header, and load it back.

use molgraph::lm::Vocabulary;
use molgraph::pipeline::checkpoint::decode_checkpoint;
use molgraph::pipeline::{load_model, save_model};
use molgraph::{ModelConfig, MolGraphModel};

fn main() -> anyhow::Result<()> {
    let vocab = Vocabulary::from_corpus(["CCO", "Describe.", "An alcohol."]);
    let model = MolGraphModel::new(ModelConfig::new(vocab, 2, 2, 16, 0))?;
    let path = std::env::temp_dir().join("molgraph-roundtrip.ckpt");
    save_model(&model, &path)?;

    let bytes = std::fs::read(&path)?;
    println!("magic {:?}, {} bytes", std::str::from_utf8(&bytes[..6])?, bytes.len());
    let (store, config) = decode_checkpoint(&bytes)?;
    println!("{} tensors, config keys {:?}", store.names().count(), config.as_object().map(|o| o.keys().collect::<Vec<_>>()));

    let back = load_model(&path)?;
    let turns = vec![("Describe.".to_string(), "An alcohol.".to_string())];
    println!("loss before {:.6}, after {:.6}", model.loss("CCO", &turns)?, back.loss("CCO", &turns)?);
    Ok(())
}
