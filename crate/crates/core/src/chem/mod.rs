//! SMILES parsing into featurized molecular graphs.
//!
//! Supported: organic-subset and bracket atoms (elements H through Xe),
//! charges, isotopes, single/double/triple/aromatic bonds, branches, ring
//! closures including `%nn`, and `.`-separated fragments. Stereo markers
//! (`/`, `\`, `@`, `@@`) are recorded but never interpreted. Aromaticity is
//! purely syntactic: lowercase atoms are aromatic, and a bond between two
//! aromatic atoms without an explicit symbol is aromatic.

mod element;
pub mod rings;
mod smiles;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::Tensor;

pub use element::{Element, ELEMENT_COUNT};

/// Node feature layout: element one-hot, then degree, formal charge,
/// hydrogen count and aromatic flag.
pub const NODE_FEATURE_DIM: usize = ELEMENT_COUNT + 4;
/// Edge feature layout: bond-order one-hot (single, double, triple,
/// aromatic), then the in-ring flag.
pub const EDGE_FEATURE_DIM: usize = 5;

pub const DEGREE_SLOT: usize = ELEMENT_COUNT;
pub const CHARGE_SLOT: usize = ELEMENT_COUNT + 1;
pub const HYDROGEN_SLOT: usize = ELEMENT_COUNT + 2;
pub const AROMATIC_SLOT: usize = ELEMENT_COUNT + 3;
pub const IN_RING_SLOT: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmilesError {
    #[error("empty SMILES")]
    EmptyInput,
    #[error("non-ASCII byte at offset {offset}")]
    NonAscii { offset: usize },
    #[error("ring closure opened at offset {offset} is never closed")]
    UnmatchedRingClosure { offset: usize },
    #[error("unbalanced parenthesis at offset {offset}")]
    UnbalancedParenthesis { offset: usize },
    #[error("unknown element `{symbol}` at offset {offset}")]
    UnknownElement { offset: usize, symbol: String },
    #[error("unexpected character `{found}` at offset {offset}")]
    UnexpectedCharacter { offset: usize, found: char },
    #[error("invalid bond at offset {offset}: {reason}")]
    InvalidBond { offset: usize, reason: &'static str },
    #[error("malformed bracket atom starting at offset {offset}")]
    InvalidBracketAtom { offset: usize },
}

impl SmilesError {
    /// Byte offset of the fault (0 for empty input).
    pub fn offset(&self) -> usize {
        match self {
            SmilesError::EmptyInput => 0,
            SmilesError::NonAscii { offset }
            | SmilesError::UnmatchedRingClosure { offset }
            | SmilesError::UnbalancedParenthesis { offset }
            | SmilesError::UnknownElement { offset, .. }
            | SmilesError::UnexpectedCharacter { offset, .. }
            | SmilesError::InvalidBond { offset, .. }
            | SmilesError::InvalidBracketAtom { offset } => *offset,
        }
    }

    /// Variant name, used by the corpus tests and the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            SmilesError::EmptyInput => "EmptyInput",
            SmilesError::NonAscii { .. } => "NonAscii",
            SmilesError::UnmatchedRingClosure { .. } => "UnmatchedRingClosure",
            SmilesError::UnbalancedParenthesis { .. } => "UnbalancedParenthesis",
            SmilesError::UnknownElement { .. } => "UnknownElement",
            SmilesError::UnexpectedCharacter { .. } => "UnexpectedCharacter",
            SmilesError::InvalidBond { .. } => "InvalidBond",
            SmilesError::InvalidBracketAtom { .. } => "InvalidBracketAtom",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    pub is_aromatic: bool,
    /// Explicit for bracket atoms, inferred from valence otherwise.
    pub hydrogen_count: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isotope: Option<u16>,
    /// Raw chirality marker, e.g. `@` or `@@`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chirality: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn one_hot_index(self) -> usize {
        self as usize
    }

    /// Valence contribution; aromatic bonds count 1.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondStereo {
    Up,
    Down,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub begin: usize,
    pub end: usize,
    pub order: BondOrder,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stereo: Option<BondStereo>,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.begin == atom {
            self.end
        } else {
            self.begin
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MolecularGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    /// `atoms.len() × NODE_FEATURE_DIM`.
    pub node_features: Tensor,
    /// `bonds.len() × EDGE_FEATURE_DIM`.
    pub edge_features: Tensor,
    pub source_smiles: String,
    /// Number of connected components; more than one only with `.`.
    pub fragment_count: usize,
}

impl MolecularGraph {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_multi_fragment(&self) -> bool {
        self.fragment_count > 1
    }

    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        self.bonds.iter().map(|b| (b.begin, b.end)).collect()
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.bonds.iter().filter(|b| b.begin == atom || b.end == atom).count()
    }

    /// `(neighbor, bond index)` pairs sorted by neighbor index.
    pub fn neighbors(&self, atom: usize) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .bonds
            .iter()
            .enumerate()
            .filter(|(_, b)| b.begin == atom || b.end == atom)
            .map(|(i, b)| (b.other(atom), i))
            .collect();
        out.sort_unstable();
        out
    }

    /// Symmetric 0/1 adjacency matrix.
    pub fn adjacency(&self) -> Tensor {
        let n = self.atoms.len();
        let mut a = Tensor::zeros(n, n);
        for b in &self.bonds {
            a.set(b.begin, b.end, 1.0);
            a.set(b.end, b.begin, 1.0);
        }
        a
    }

    /// Atom × bond incidence matrix.
    pub fn incidence(&self) -> Tensor {
        let mut m = Tensor::zeros(self.atoms.len(), self.bonds.len());
        for (i, b) in self.bonds.iter().enumerate() {
            m.set(b.begin, i, 1.0);
            m.set(b.end, i, 1.0);
        }
        m
    }

    pub fn total_hydrogens(&self) -> usize {
        self.atoms.iter().map(|a| a.hydrogen_count as usize).sum()
    }

    pub fn ring_count(&self) -> usize {
        rings::cycle_rank(self.atoms.len(), &self.edge_list())
    }

    pub fn ring_bond_flags(&self) -> Vec<bool> {
        rings::ring_edges(self.atoms.len(), &self.edge_list())
    }

    pub fn rings(&self) -> Vec<rings::Ring> {
        rings::sssr(self.atoms.len(), &self.edge_list())
    }

    /// Relabels atoms so that old atom `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MolecularGraph {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = self.atoms.clone();
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = self.atoms[old].clone();
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond { begin: perm[b.begin], end: perm[b.end], ..b.clone() })
            .collect();
        let mut g = MolecularGraph {
            atoms,
            bonds,
            node_features: Tensor::zeros(0, 0),
            edge_features: Tensor::zeros(0, 0),
            source_smiles: self.source_smiles.clone(),
            fragment_count: self.fragment_count,
        };
        featurize(&mut g);
        g
    }
}

/// Parses SMILES into a featurized graph.
pub fn parse_smiles(text: &str) -> Result<MolecularGraph, SmilesError> {
    let smiles::Parsed { mut atoms, bonds, bracketed } = smiles::parse(text)?;
    assign_implicit_hydrogens(&mut atoms, &bonds, &bracketed);
    let edges: Vec<(usize, usize)> = bonds.iter().map(|b| (b.begin, b.end)).collect();
    let fragment_count = rings::component_count(atoms.len(), &edges);
    let mut graph = MolecularGraph {
        atoms,
        bonds,
        node_features: Tensor::zeros(0, 0),
        edge_features: Tensor::zeros(0, 0),
        source_smiles: text.to_string(),
        fragment_count,
    };
    featurize(&mut graph);
    Ok(graph)
}

/// `true` iff [`parse_smiles`] succeeds.
pub fn validate(text: &str) -> bool {
    parse_smiles(text).is_ok()
}

fn assign_implicit_hydrogens(atoms: &mut [Atom], bonds: &[Bond], bracketed: &[bool]) {
    let mut bond_sum = vec![0u8; atoms.len()];
    for b in bonds {
        bond_sum[b.begin] += b.order.valence();
        bond_sum[b.end] += b.order.valence();
    }
    for (i, atom) in atoms.iter_mut().enumerate() {
        if bracketed[i] {
            continue;
        }
        let used = bond_sum[i];
        let target = atom.element.default_valences().iter().copied().find(|v| *v >= used);
        let aromatic_adjust = u8::from(atom.is_aromatic);
        atom.hydrogen_count = target.map_or(0, |t| t.saturating_sub(used).saturating_sub(aromatic_adjust));
    }
}

/// Recomputes `node_features` and `edge_features` from atoms and bonds.
pub fn featurize(graph: &mut MolecularGraph) {
    let n = graph.atoms.len();
    let mut degree = vec![0usize; n];
    for b in &graph.bonds {
        degree[b.begin] += 1;
        degree[b.end] += 1;
    }
    let mut nodes = Tensor::zeros(n, NODE_FEATURE_DIM);
    for (i, atom) in graph.atoms.iter().enumerate() {
        nodes.set(i, atom.element.table_index(), 1.0);
        nodes.set(i, DEGREE_SLOT, degree[i] as f64);
        nodes.set(i, CHARGE_SLOT, atom.formal_charge as f64);
        nodes.set(i, HYDROGEN_SLOT, atom.hydrogen_count as f64);
        nodes.set(i, AROMATIC_SLOT, if atom.is_aromatic { 1.0 } else { 0.0 });
    }
    let in_ring = graph.ring_bond_flags();
    let mut edges = Tensor::zeros(graph.bonds.len(), EDGE_FEATURE_DIM);
    for (i, b) in graph.bonds.iter().enumerate() {
        edges.set(i, b.order.one_hot_index(), 1.0);
        edges.set(i, IN_RING_SLOT, if in_ring[i] { 1.0 } else { 0.0 });
    }
    graph.node_features = nodes;
    graph.edge_features = edges;
}

/// JSON view used by `molgraph parse --json`.
#[derive(Debug, Serialize)]
pub struct GraphSummary<'a> {
    pub smiles: &'a str,
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub atoms: &'a [Atom],
    pub bonds: &'a [Bond],
    pub fragments: usize,
    pub rings: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn methane() {
        let g = parse_smiles("C").unwrap();
        assert_eq!(g.atom_count(), 1);
        assert_eq!(g.bond_count(), 0);
        assert_eq!(g.atoms[0].hydrogen_count, 4);
        assert_eq!(g.node_features.get(0, DEGREE_SLOT), 0.0);
    }

    #[test]
    fn cyclopropane() {
        let g = parse_smiles("C1CC1").unwrap();
        assert_eq!(g.atom_count(), 3);
        assert_eq!(g.bond_count(), 3);
        assert!(g.bonds.iter().all(|b| b.order == BondOrder::Single));
        assert_eq!(g.ring_count(), 1);
        assert!(g.ring_bond_flags().iter().all(|f| *f));
    }

    #[test]
    fn acetate() {
        let g = parse_smiles("CC(=O)[O-]").unwrap();
        assert_eq!(g.atom_count(), 4);
        let orders: Vec<_> = g.bonds.iter().map(|b| (b.begin, b.end, b.order)).collect();
        assert_eq!(
            orders,
            vec![(0, 1, BondOrder::Single), (1, 2, BondOrder::Double), (1, 3, BondOrder::Single)]
        );
        assert_eq!(g.atoms[3].formal_charge, -1);
        assert_eq!(g.atoms[3].hydrogen_count, 0);
    }

    #[test]
    fn error_offsets() {
        assert_eq!(parse_smiles("C1CC").unwrap_err(), SmilesError::UnmatchedRingClosure { offset: 1 });
        assert_eq!(parse_smiles("CC(C").unwrap_err(), SmilesError::UnbalancedParenthesis { offset: 2 });
        assert_eq!(parse_smiles("CC)C").unwrap_err(), SmilesError::UnbalancedParenthesis { offset: 2 });
        assert_eq!(
            parse_smiles("C[Xz]C").unwrap_err(),
            SmilesError::UnknownElement { offset: 2, symbol: "Xz".into() }
        );
        assert!(matches!(parse_smiles("CXC").unwrap_err(), SmilesError::UnknownElement { offset: 1, .. }));
        assert_eq!(parse_smiles("").unwrap_err(), SmilesError::EmptyInput);
        assert!(matches!(parse_smiles("C1C1").unwrap_err(), SmilesError::InvalidBond { .. }));
        assert!(matches!(parse_smiles("CC=").unwrap_err(), SmilesError::InvalidBond { offset: 2, .. }));
    }

    #[test]
    fn validate_never_panics() {
        assert!(validate("CCO"));
        assert!(!validate(""));
        assert!(!validate("C1CC"));
        assert!(!validate("[C"));
        assert!(!validate("C(("));
        assert!(!validate("%"));
    }

    #[test]
    fn ethane_degrees() {
        let g = parse_smiles("CC").unwrap();
        assert_eq!(g.node_features.get(0, DEGREE_SLOT), 1.0);
        assert_eq!(g.node_features.get(1, DEGREE_SLOT), 1.0);
    }

    #[test]
    fn benzene_is_aromatic_and_in_ring() {
        let g = parse_smiles("c1ccccc1").unwrap();
        for i in 0..6 {
            assert_eq!(g.node_features.get(i, AROMATIC_SLOT), 1.0);
            assert_eq!(g.atoms[i].hydrogen_count, 1);
        }
        for e in 0..6 {
            assert_eq!(g.edge_features.get(e, IN_RING_SLOT), 1.0);
            assert_eq!(g.bonds[e].order, BondOrder::Aromatic);
        }
    }

    #[test]
    fn bracket_details_are_recorded() {
        let g = parse_smiles("[13CH4]").unwrap();
        assert_eq!(g.atoms[0].isotope, Some(13));
        assert_eq!(g.atoms[0].hydrogen_count, 4);
        let g = parse_smiles("N[C@@H](C)C(=O)O").unwrap();
        assert_eq!(g.atoms[1].chirality.as_deref(), Some("@@"));
        assert_eq!(g.atoms[1].hydrogen_count, 1);
        let g = parse_smiles("F/C=C/F").unwrap();
        assert_eq!(g.bonds[0].stereo, Some(BondStereo::Up));
        assert_eq!(parse_smiles("[Fe+3]").unwrap().atoms[0].formal_charge, 3);
        assert_eq!(parse_smiles("[O--]").unwrap().atoms[0].formal_charge, -2);
    }

    #[test]
    fn percent_ring_closures_and_fragments() {
        let g = parse_smiles("C%10CC%10").unwrap();
        assert_eq!(g.ring_count(), 1);
        let g = parse_smiles("[Na+].[Cl-]").unwrap();
        assert_eq!(g.fragment_count, 2);
        assert!(g.is_multi_fragment());
    }

    #[test]
    fn aromatic_hydrogens() {
        // caffeine: no aromatic atom carries an implicit H except the CH
        let g = parse_smiles("Cn1cnc2c1c(=O)n(C)c(=O)n2C").unwrap();
        assert_eq!(g.total_hydrogens(), 10);
        let g = parse_smiles("c1ccncc1").unwrap();
        assert_eq!(g.total_hydrogens(), 5);
    }
}
