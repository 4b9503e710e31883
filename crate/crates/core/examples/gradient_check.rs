//! Record a small computation on the tape, backpropagate, and compare the
//! result with central differences.

use molgraph::numerics::finite_difference_check;
use molgraph::{ParameterStore, Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut store = ParameterStore::new();
    store.insert("w", Tensor::uniform(4, 3, 1.0, &mut rng), true).unwrap();
    store.insert("b", Tensor::uniform(1, 3, 1.0, &mut rng), true).unwrap();
    let x = Tensor::uniform(5, 4, 1.0, &mut rng);

    let report = finite_difference_check(&store, 1e-6, 1e-6, |tape: &mut Tape, store| {
        let w = tape.param(store, "w")?;
        let b = tape.param(store, "b")?;
        let x = tape.leaf(x.clone());
        let h = tape.matmul(x, w)?;
        let h = tape.add_row(h, b)?;
        let h = tape.silu(h);
        Ok(tape.sum(h))
    })
    .unwrap();
    for t in &report.tensors {
        println!("{}: {} elements, max rel error {:.2e}", t.name, t.elements, t.max_rel_error);
    }
    println!("passed: {}", report.passed());
}
