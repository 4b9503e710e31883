//! Detect functional groups and build the motif matrix.

use molgraph::motif::{detect_functional_groups, motif_matrix};
use molgraph::parse_smiles;

fn main() {
    for s in ["CC(=O)Oc1ccccc1C(=O)O", "NCC(=O)O", "OC(O)C(F)(F)F", "CCCC"] {
        let g = parse_smiles(s).expect("valid SMILES");
        println!("{s}");
        for group in detect_functional_groups(&g) {
            println!("  {:?} atoms {:?} ring {}", group.kind, group.atom_indices, group.ring_flag);
        }
        let m = motif_matrix(&g);
        println!("  motif matrix {}x{}", m.rows.rows(), m.rows.cols());
    }
}
