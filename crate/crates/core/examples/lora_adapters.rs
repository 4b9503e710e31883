//! Attach low-rank adapters, nudge them, and merge them back into the base.

use molgraph::lm::{lora_attach, lora_merge, lora::up_name, Vocabulary};
use molgraph::{ModelConfig, MolGraphModel, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let vocab = Vocabulary::from_corpus(["CCO", "Describe the molecule.", "An alcohol."]);
    let mut model = MolGraphModel::new(ModelConfig::new(vocab, 2, 2, 16, 0)).unwrap();
    let turns = vec![("Describe the molecule.".to_string(), "An alcohol.".to_string())];
    let before = model.loss("CCO", &turns).unwrap();

    let targets = model.config.lm.adapter_targets();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    lora_attach(&mut model.store, &targets, 4, 8.0, &mut rng).unwrap();
    println!("attached {} adapters, loss unchanged: {}", targets.len(), model.loss("CCO", &turns).unwrap() == before);

    for t in &targets {
        let (r, c) = model.store.get(&up_name(t)).unwrap().shape();
        model.store.set(&up_name(t), Tensor::uniform(r, c, 0.1, &mut rng)).unwrap();
    }
    let adapted = model.loss("CCO", &turns).unwrap();
    lora_merge(&mut model.store).unwrap();
    let merged = model.loss("CCO", &turns).unwrap();
    println!("adapted loss {adapted:.6}, merged loss {merged:.6}");
}
