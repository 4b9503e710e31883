//! Parse a few SMILES strings and print the resulting graphs.
//!
//! cargo run --example parse_smiles -- "CC(=O)Oc1ccccc1C(=O)O"

use molgraph::{parse_smiles, validate};

fn main() {
    let inputs: Vec<String> = std::env::args().skip(1).collect();
    let inputs = if inputs.is_empty() {
        vec!["CCO".to_string(), "c1ccccc1O".into(), "[NH4+].[Cl-]".into(), "C1CC".into()]
    } else {
        inputs
    };
    for s in &inputs {
        match parse_smiles(s) {
            Ok(g) => {
                let elements: Vec<String> = g.atoms.iter().map(|a| a.element.to_string()).collect();
                println!("{s}: {} atoms, {} bonds, {} fragment(s)", g.atom_count(), g.bond_count(), g.fragment_count);
                println!("  atoms {}", elements.join(" "));
                println!("  edges {:?}", g.edge_list());
                println!("  features {}x{}", g.node_features.rows(), g.node_features.cols());
            }
            Err(e) => println!("{s}: error: {e}"),
        }
        println!("  valid: {}", validate(s));
    }
}
