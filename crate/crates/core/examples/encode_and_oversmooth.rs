//! Run the GIN encoder and watch node representations collapse with depth.

use molgraph::encoder::{self, oversmoothing_csv, oversmoothing_stats, GinConfig};
use molgraph::{parse_smiles, ParameterStore};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let g = parse_smiles("CC(C)CC1=CC=C(C=C1)C(C)C(=O)O").expect("valid SMILES");
    let gin = GinConfig::with_width(5, 64);
    let mut store = ParameterStore::new();
    encoder::init_params(&gin, &mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();

    let stack = encoder::encode(&g, &gin, &store).unwrap();
    for (l, level) in stack.levels.iter().enumerate() {
        println!("level {l}: {}x{}", level.rows(), level.cols());
    }
    let stats = oversmoothing_stats(&stack).unwrap();
    print!("{}", oversmoothing_csv(&stats, &[1, 2, 4, 5]));
}
