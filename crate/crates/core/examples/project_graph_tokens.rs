//! Turn an encoded molecule into graph tokens with each projector variant.

use molgraph::encoder::{self, GinConfig};
use molgraph::motif::motif_matrix;
use molgraph::projector::{self, ProjectorConfig, ProjectorVariant};
use molgraph::{parse_smiles, ParameterStore};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let smiles = "CC(=O)Oc1ccccc1C(=O)O";
    let g = parse_smiles(smiles).unwrap();
    let gin = GinConfig::with_width(3, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut store = ParameterStore::new();
    encoder::init_params(&gin, &mut store, &mut rng).unwrap();
    let stack = encoder::encode(&g, &gin, &store).unwrap();
    let motifs = motif_matrix(&g);

    for variant in [ProjectorVariant::MgProj, ProjectorVariant::NoMotif] {
        let mut config = ProjectorConfig::for_encoder(&gin, 4, 32);
        config.variant = variant;
        let mut s = store.clone();
        projector::init_params(&config, &mut s, &mut rng).unwrap();
        let tokens = projector::project(&stack, &motifs, &config, &s, smiles).unwrap();
        println!("{variant:?}: {:?} hash {}", tokens.matrix.shape(), tokens.content_hash());
    }

    // ablation baselines have their own entry point and ignore motifs
    for variant in [ProjectorVariant::Low, ProjectorVariant::High, ProjectorVariant::Concat, ProjectorVariant::Resampler] {
        let mut config = ProjectorConfig::for_encoder(&gin, 4, 32);
        config.variant = variant;
        let mut s = store.clone();
        projector::init_params(&config, &mut s, &mut rng).unwrap();
        let tokens = projector::project_baseline(&stack, &config, &s).unwrap();
        println!("{variant:?}: {:?}", tokens.shape());
    }
}
