use molgraph::chem::{parse_smiles, validate};
use serde::Deserialize;

#[derive(Deserialize)]
struct OracleRecord {
    smiles: String,
    valid: bool,
    atoms: Option<usize>,
    bonds: Option<usize>,
    rings: Option<usize>,
    fragments: Option<usize>,
    total_h: Option<usize>,
    charge: Option<i64>,
    error: Option<String>,
}

fn corpus() -> Vec<OracleRecord> {
    include_str!("data/smiles_oracle.jsonl")
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn every_record_agrees_with_the_toolkit_oracle() {
    let mut failures = Vec::new();
    for rec in corpus() {
        assert_eq!(validate(&rec.smiles), rec.valid, "{}", rec.smiles);
        match parse_smiles(&rec.smiles) {
            Ok(g) => {
                let charge: i64 = g.atoms.iter().map(|a| a.formal_charge as i64).sum();
                let got = (
                    g.atom_count(),
                    g.bond_count(),
                    g.ring_count(),
                    g.fragment_count,
                    g.total_hydrogens(),
                    charge,
                );
                let want = (
                    rec.atoms.unwrap(),
                    rec.bonds.unwrap(),
                    rec.rings.unwrap(),
                    rec.fragments.unwrap(),
                    rec.total_h.unwrap(),
                    rec.charge.unwrap(),
                );
                if got != want {
                    failures.push(format!("{}: got {got:?} want {want:?}", rec.smiles));
                }
            }
            Err(e) => {
                if rec.valid {
                    failures.push(format!("{}: unexpected error {e}", rec.smiles));
                } else if Some(e.kind()) != rec.error.as_deref() {
                    failures.push(format!("{}: error {} want {:?}", rec.smiles, e.kind(), rec.error));
                }
            }
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn corpus_has_one_hundred_valid_and_four_malformed() {
    let c = corpus();
    assert_eq!(c.iter().filter(|r| r.valid).count(), 100);
    assert_eq!(c.iter().filter(|r| !r.valid).count(), 4);
}
