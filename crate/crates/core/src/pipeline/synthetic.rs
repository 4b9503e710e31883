//! Seeded toy corpora for exercising training end to end.
//!
//! Molecules are assembled from a small fragment set; captions are templated
//! from the parsed structure, so they depend on the graph and not on the
//! random draw.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::data::{SampleRecord, Task};
use crate::chem::parse_smiles;
use crate::motif::{detect_functional_groups, GroupKind};

const CORE: &[&str] = &["C", "CC", "C(C)", "O", "N", "C(=O)", "C(=O)O", "c1ccccc1", "C1CCCC1", "C=C", "S", "C(O)"];
const CAPS: &[&str] = &["Cl", "F", "Br", "O", "N", "C#N", "C(=O)O", "C"];

pub const CAPTION_INSTRUCTION: &str = "Describe the molecule.";

fn kind_label(kind: GroupKind) -> &'static str {
    match kind {
        GroupKind::Carboxyl => "carboxyl",
        GroupKind::Ester => "ester",
        GroupKind::Amide => "amide",
        GroupKind::Hydroxyl => "hydroxyl",
        GroupKind::Amine => "amine",
        GroupKind::Ether => "ether",
        GroupKind::Ketone => "ketone",
        GroupKind::Aldehyde => "aldehyde",
        GroupKind::Nitrile => "nitrile",
        GroupKind::Nitro => "nitro",
        GroupKind::Thiol => "thiol",
        GroupKind::Halogen => "halogen",
        GroupKind::Phosphate => "phosphate",
        GroupKind::Sulfonyl => "sulfonyl",
        GroupKind::AromaticRing => "aromatic ring",
        GroupKind::AliphaticRing => "aliphatic ring",
    }
}

/// Templated description of a valid SMILES string.
pub fn describe(smiles: &str) -> Option<String> {
    let g = parse_smiles(smiles).ok()?;
    let mut counts: BTreeMap<GroupKind, usize> = BTreeMap::new();
    for group in detect_functional_groups(&g) {
        *counts.entry(group.kind).or_default() += 1;
    }
    let groups = if counts.is_empty() {
        "no groups".to_string()
    } else {
        counts
            .iter()
            .map(|(k, n)| if *n == 1 { kind_label(*k).to_string() } else { format!("{n} {}", kind_label(*k)) })
            .collect::<Vec<_>>()
            .join(", ")
    };
    Some(format!("{} atoms; {groups}.", g.atom_count()))
}

/// A random SMILES built from 1 to 4 fragments plus an optional end cap.
pub fn random_smiles<R: Rng>(rng: &mut R) -> String {
    let mut s = String::new();
    for _ in 0..rng.gen_range(1..=4) {
        s.push_str(CORE.choose(rng).expect("non-empty"));
    }
    if rng.gen_bool(0.6) {
        s.push_str(CAPS.choose(rng).expect("non-empty"));
    }
    s
}

/// `n` caption records over distinct molecules.
pub fn caption_corpus(n: usize, seed: u64) -> Vec<SampleRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let smiles = random_smiles(&mut rng);
        if !seen.insert(smiles.clone()) {
            continue;
        }
        if let Some(caption) = describe(&smiles) {
            out.push(SampleRecord {
                smiles,
                instruction: CAPTION_INSTRUCTION.to_string(),
                response: caption,
                task: Task::Caption,
            });
        }
    }
    out
}
