//! Functional-group (motif) detection and the motif feature matrix.
//!
//! Detection is a fixed catalog of structural rules over the parsed graph.
//! Groups of different kinds may share atoms (an ester oxygen also matches
//! the ether rule); within one kind, overlapping matches are merged into one
//! maximal group, so matches of a kind are disjoint. Ring kinds match whole ring systems (fused rings
//! merged), which keeps them disjoint as well.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::chem::{rings::Ring, BondOrder, Element, MolecularGraph, NODE_FEATURE_DIM};
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    Carboxyl,
    Ester,
    Amide,
    Hydroxyl,
    Amine,
    Ether,
    Ketone,
    Aldehyde,
    Nitrile,
    Nitro,
    Thiol,
    Halogen,
    Phosphate,
    Sulfonyl,
    AromaticRing,
    AliphaticRing,
}

impl GroupKind {
    pub const ALL: [GroupKind; 16] = [
        GroupKind::Carboxyl,
        GroupKind::Ester,
        GroupKind::Amide,
        GroupKind::Hydroxyl,
        GroupKind::Amine,
        GroupKind::Ether,
        GroupKind::Ketone,
        GroupKind::Aldehyde,
        GroupKind::Nitrile,
        GroupKind::Nitro,
        GroupKind::Thiol,
        GroupKind::Halogen,
        GroupKind::Phosphate,
        GroupKind::Sulfonyl,
        GroupKind::AromaticRing,
        GroupKind::AliphaticRing,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_ring(self) -> bool {
        matches!(self, GroupKind::AromaticRing | GroupKind::AliphaticRing)
    }
}

pub const KIND_COUNT: usize = GroupKind::ALL.len();
pub const ATOM_COUNT_SLOT: usize = KIND_COUNT;
pub const RING_FLAG_SLOT: usize = KIND_COUNT + 1;
/// Kind one-hot, atom count, ring flag, mean member node features.
pub const MOTIF_DIM: usize = KIND_COUNT + 2 + NODE_FEATURE_DIM;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalGroup {
    pub kind: GroupKind,
    pub atom_indices: BTreeSet<usize>,
    pub ring_flag: bool,
}

/// One catalog rule. Optional fields narrow the default rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub kind: GroupKind,
    /// Halogen rule: which elements count (default F, Cl, Br, I).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<Element>>,
    /// Ring rules: largest ring size admitted into a ring system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ring_size: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Catalog {
    pub rules: Vec<RuleSpec>,
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog {
            rules: GroupKind::ALL
                .iter()
                .map(|&kind| RuleSpec { kind, elements: None, max_ring_size: None })
                .collect(),
        }
    }
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotifMatrix {
    /// `M × MOTIF_DIM`; `M` may be zero.
    pub rows: Tensor,
    pub group_refs: Vec<FunctionalGroup>,
}

impl MotifMatrix {
    pub fn len(&self) -> usize {
        self.group_refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group_refs.is_empty()
    }
}

/// Local view of the graph used by the rules.
struct View<'a> {
    g: &'a MolecularGraph,
    nbrs: Vec<Vec<(usize, BondOrder)>>,
}

impl<'a> View<'a> {
    fn new(g: &'a MolecularGraph) -> Self {
        let mut nbrs = vec![Vec::new(); g.atoms.len()];
        for b in &g.bonds {
            nbrs[b.begin].push((b.end, b.order));
            nbrs[b.end].push((b.begin, b.order));
        }
        for n in &mut nbrs {
            n.sort_unstable();
        }
        View { g, nbrs }
    }

    fn el(&self, a: usize) -> Element {
        self.g.atoms[a].element
    }

    fn h(&self, a: usize) -> u8 {
        self.g.atoms[a].hydrogen_count
    }

    fn charge(&self, a: usize) -> i8 {
        self.g.atoms[a].formal_charge
    }

    fn aromatic(&self, a: usize) -> bool {
        self.g.atoms[a].is_aromatic
    }

    fn is(&self, a: usize, e: Element) -> bool {
        self.el(a) == e
    }

    /// Oxygens double-bonded to `a`.
    fn double_o(&self, a: usize) -> Vec<usize> {
        self.nbrs[a]
            .iter()
            .filter(|(n, o)| *o == BondOrder::Double && self.is(*n, Element::O))
            .map(|(n, _)| *n)
            .collect()
    }

    fn single(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.nbrs[a]
            .iter()
            .filter(|(_, o)| *o == BondOrder::Single)
            .map(|(n, _)| *n)
    }

    fn carbonyl_carbon(&self, c: usize) -> Option<usize> {
        if !self.is(c, Element::C) || self.aromatic(c) {
            return None;
        }
        self.double_o(c).first().copied()
    }

    /// OH or O⁻ singly bonded and otherwise bare.
    fn acidic_oxygen(&self, o: usize) -> bool {
        self.is(o, Element::O) && self.nbrs[o].len() == 1 && (self.h(o) >= 1 || self.charge(o) < 0)
    }
}

fn candidates(view: &View, rule: &RuleSpec, rings: &[Ring]) -> Vec<BTreeSet<usize>> {
    let n = view.g.atoms.len();
    let mut out: Vec<BTreeSet<usize>> = Vec::new();
    let mut push = |atoms: &[usize]| out.push(atoms.iter().copied().collect());
    match rule.kind {
        GroupKind::Carboxyl => {
            for c in 0..n {
                let Some(o1) = view.carbonyl_carbon(c) else { continue };
                for o2 in view.single(c) {
                    if view.acidic_oxygen(o2) {
                        push(&[c, o1, o2]);
                    }
                }
            }
        }
        GroupKind::Ester => {
            for c in 0..n {
                let Some(o1) = view.carbonyl_carbon(c) else { continue };
                for o2 in view.single(c) {
                    if view.is(o2, Element::O)
                        && view.h(o2) == 0
                        && view.charge(o2) == 0
                        && view.single(o2).any(|x| x != c && view.is(x, Element::C))
                    {
                        push(&[c, o1, o2]);
                    }
                }
            }
        }
        GroupKind::Amide => {
            for c in 0..n {
                let Some(o1) = view.carbonyl_carbon(c) else { continue };
                for nn in view.single(c) {
                    if view.is(nn, Element::N) && !view.aromatic(nn) {
                        push(&[c, o1, nn]);
                    }
                }
            }
        }
        GroupKind::Hydroxyl => {
            for o in 0..n {
                if !view.is(o, Element::O) || view.h(o) == 0 || view.nbrs[o].len() != 1 {
                    continue;
                }
                let (attach, order) = view.nbrs[o][0];
                if order != BondOrder::Single || !view.is(attach, Element::C) {
                    continue;
                }
                if view.carbonyl_carbon(attach).is_some() {
                    continue;
                }
                push(&[o, attach]);
            }
        }
        GroupKind::Thiol => {
            for s in 0..n {
                if !view.is(s, Element::S) || view.h(s) == 0 || view.nbrs[s].len() != 1 {
                    continue;
                }
                let (attach, order) = view.nbrs[s][0];
                if order == BondOrder::Single && view.is(attach, Element::C) {
                    push(&[s, attach]);
                }
            }
        }
        GroupKind::Amine => {
            for a in 0..n {
                if !view.is(a, Element::N) || view.aromatic(a) {
                    continue;
                }
                if view.nbrs[a].iter().any(|(_, o)| *o != BondOrder::Single) {
                    continue;
                }
                let acyl = view
                    .single(a)
                    .any(|x| view.carbonyl_carbon(x).is_some() || view.is(x, Element::O) || view.is(x, Element::S));
                if !acyl {
                    push(&[a]);
                }
            }
        }
        GroupKind::Ether => {
            for o in 0..n {
                if !view.is(o, Element::O) || view.aromatic(o) || view.nbrs[o].len() != 2 {
                    continue;
                }
                let cs: Vec<usize> = view.single(o).filter(|x| view.is(*x, Element::C)).collect();
                if cs.len() == 2 {
                    push(&[cs[0], o, cs[1]]);
                }
            }
        }
        GroupKind::Ketone | GroupKind::Aldehyde => {
            for c in 0..n {
                let Some(o1) = view.carbonyl_carbon(c) else { continue };
                let others: Vec<usize> = view.nbrs[c].iter().map(|x| x.0).filter(|x| *x != o1).collect();
                let carbons = others.iter().filter(|x| view.is(**x, Element::C)).count();
                let hetero = others.len() - carbons;
                let is_ketone = carbons == 2 && hetero == 0;
                let is_aldehyde = hetero == 0 && carbons <= 1 && view.h(c) >= 1;
                if (rule.kind == GroupKind::Ketone && is_ketone) || (rule.kind == GroupKind::Aldehyde && is_aldehyde) {
                    push(&[c, o1]);
                }
            }
        }
        GroupKind::Nitrile => {
            for c in 0..n {
                for &(nn, order) in &view.nbrs[c] {
                    if view.is(c, Element::C) && order == BondOrder::Triple && view.is(nn, Element::N) {
                        push(&[c, nn]);
                    }
                }
            }
        }
        GroupKind::Nitro => {
            for a in 0..n {
                if !view.is(a, Element::N) {
                    continue;
                }
                let os: Vec<usize> = view.nbrs[a]
                    .iter()
                    .filter(|(x, _)| view.is(*x, Element::O) && view.nbrs[*x].len() == 1)
                    .map(|(x, _)| *x)
                    .collect();
                if os.len() == 2 && !view.double_o(a).is_empty() {
                    push(&[a, os[0], os[1]]);
                }
            }
        }
        GroupKind::Halogen => {
            for x in 0..n {
                let el = view.el(x);
                let allowed = match &rule.elements {
                    Some(list) => list.contains(&el),
                    None => el.is_halogen(),
                };
                if allowed && !view.nbrs[x].is_empty() {
                    push(&[x]);
                }
            }
        }
        GroupKind::Phosphate => {
            for p in 0..n {
                if !view.is(p, Element::P) {
                    continue;
                }
                let os: Vec<usize> = view.nbrs[p]
                    .iter()
                    .filter(|(x, _)| view.is(*x, Element::O))
                    .map(|(x, _)| *x)
                    .collect();
                if os.len() >= 3 && !view.double_o(p).is_empty() {
                    let mut atoms = vec![p];
                    atoms.extend(os);
                    push(&atoms);
                }
            }
        }
        GroupKind::Sulfonyl => {
            for s in 0..n {
                if !view.is(s, Element::S) {
                    continue;
                }
                let os = view.double_o(s);
                if os.len() >= 2 {
                    push(&[s, os[0], os[1]]);
                }
            }
        }
        GroupKind::AromaticRing | GroupKind::AliphaticRing => {
            let want_aromatic = rule.kind == GroupKind::AromaticRing;
            let max = rule.max_ring_size.unwrap_or(usize::MAX);
            let selected: Vec<&Ring> = rings
                .iter()
                .filter(|r| r.atoms.len() <= max)
                .filter(|r| r.atoms.iter().all(|a| view.aromatic(*a)) == want_aromatic)
                .collect();
            // merge rings sharing atoms into ring systems
            let mut systems: Vec<BTreeSet<usize>> = Vec::new();
            for r in selected {
                let mut merged: BTreeSet<usize> = r.atoms.iter().copied().collect();
                systems.retain(|s| {
                    if s.is_disjoint(&merged) {
                        true
                    } else {
                        merged.extend(s.iter().copied());
                        false
                    }
                });
                systems.push(merged);
            }
            out.extend(systems);
        }
    }
    out
}

/// Unions candidates that share atoms until the sets are pairwise disjoint,
/// so the result does not depend on atom numbering.
fn merge_overlapping(cands: Vec<BTreeSet<usize>>) -> Vec<BTreeSet<usize>> {
    let mut merged: Vec<BTreeSet<usize>> = Vec::new();
    for mut c in cands {
        let mut i = 0;
        while i < merged.len() {
            if merged[i].is_disjoint(&c) {
                i += 1;
            } else {
                c.extend(merged.swap_remove(i));
                i = 0;
            }
        }
        merged.push(c);
    }
    merged.sort();
    merged
}

/// All catalog matches in `(kind, lowest atom index)` order.
pub fn detect_functional_groups(graph: &MolecularGraph) -> Vec<FunctionalGroup> {
    detect_with_catalog(graph, &Catalog::default())
}

pub fn detect_with_catalog(graph: &MolecularGraph, catalog: &Catalog) -> Vec<FunctionalGroup> {
    let view = View::new(graph);
    let rings = graph.rings();
    let mut groups = Vec::new();
    let mut kinds: Vec<&RuleSpec> = catalog.rules.iter().collect();
    kinds.sort_by_key(|r| r.kind);
    kinds.dedup_by_key(|r| r.kind);
    for rule in kinds {
        let mut cands = candidates(&view, rule, &rings);
        cands.sort();
        cands.dedup();
        for atoms in merge_overlapping(cands) {
            groups.push(FunctionalGroup { kind: rule.kind, atom_indices: atoms, ring_flag: rule.kind.is_ring() });
        }
    }
    groups.sort_by_key(|g| (g.kind, g.atom_indices.first().copied()));
    groups
}

/// `(kind one-hot, atom count, ring flag, mean member node features)`.
pub fn vectorize_group(group: &FunctionalGroup, graph: &MolecularGraph) -> Vec<f64> {
    let mut v = vec![0.0; MOTIF_DIM];
    v[group.kind.index()] = 1.0;
    v[ATOM_COUNT_SLOT] = group.atom_indices.len() as f64;
    v[RING_FLAG_SLOT] = if group.ring_flag { 1.0 } else { 0.0 };
    let count = group.atom_indices.len() as f64;
    for &a in &group.atom_indices {
        for (slot, x) in v[KIND_COUNT + 2..].iter_mut().zip(graph.node_features.row(a)) {
            *slot += x;
        }
    }
    for slot in &mut v[KIND_COUNT + 2..] {
        *slot /= count;
    }
    v
}

pub fn motif_matrix(graph: &MolecularGraph) -> MotifMatrix {
    motif_matrix_from(graph, detect_functional_groups(graph))
}

pub fn motif_matrix_from(graph: &MolecularGraph, groups: Vec<FunctionalGroup>) -> MotifMatrix {
    let data: Vec<f64> = groups.iter().flat_map(|g| vectorize_group(g, graph)).collect();
    MotifMatrix {
        rows: Tensor::from_vec(groups.len(), MOTIF_DIM, data).expect("motif rows are finite"),
        group_refs: groups,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn kinds(smiles: &str) -> Vec<GroupKind> {
        detect_functional_groups(&parse_smiles(smiles).unwrap())
            .into_iter()
            .map(|g| g.kind)
            .collect()
    }

    #[test]
    fn acetic_acid_has_carboxyl() {
        let g = parse_smiles("CC(=O)O").unwrap();
        let groups = detect_functional_groups(&g);
        let carboxyl = groups.iter().find(|x| x.kind == GroupKind::Carboxyl).unwrap();
        assert_eq!(carboxyl.atom_indices, BTreeSet::from([1, 2, 3]));
        assert!(!groups.iter().any(|x| x.kind == GroupKind::Hydroxyl));
    }

    #[test]
    fn ethanol_hydroxyl_counts_attachment() {
        let g = parse_smiles("CCO").unwrap();
        let groups = detect_functional_groups(&g);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].kind, GroupKind::Hydroxyl);
        assert_eq!(vectorize_group(&groups[0], &g)[ATOM_COUNT_SLOT], 2.0);
    }

    #[test]
    fn ethane_has_nothing() {
        let g = parse_smiles("CC").unwrap();
        assert!(detect_functional_groups(&g).is_empty());
        let m = motif_matrix(&g);
        assert_eq!(m.rows.shape(), (0, MOTIF_DIM));
    }

    #[test]
    fn symmetric_diol_rows_match() {
        let g = parse_smiles("OCCO").unwrap();
        let m = motif_matrix(&g);
        assert_eq!(m.len(), 2);
        assert_eq!(m.rows.row(0), m.rows.row(1));
    }

    #[test]
    fn cyclopropane_ring_flag() {
        let g = parse_smiles("C1CC1").unwrap();
        let m = motif_matrix(&g);
        assert_eq!(m.group_refs[0].kind, GroupKind::AliphaticRing);
        assert_eq!(m.rows.get(0, RING_FLAG_SLOT), 1.0);
    }

    #[test]
    fn ester_overlaps_ether() {
        let k = kinds("CC(=O)OC");
        assert!(k.contains(&GroupKind::Ester));
        assert!(k.contains(&GroupKind::Ether));
        assert!(!k.contains(&GroupKind::Ketone));
    }

    #[test]
    fn assorted_rules() {
        assert!(kinds("CC(=O)N").contains(&GroupKind::Amide));
        assert!(!kinds("CC(=O)N").contains(&GroupKind::Amine));
        assert_eq!(kinds("CCN(CC)CC"), vec![GroupKind::Amine]);
        assert_eq!(kinds("CC(C)=O"), vec![GroupKind::Ketone]);
        assert_eq!(kinds("CC=O"), vec![GroupKind::Aldehyde]);
        assert_eq!(kinds("CC#N"), vec![GroupKind::Nitrile]);
        assert_eq!(kinds("C[N+](=O)[O-]"), vec![GroupKind::Nitro]);
        assert_eq!(kinds("CS"), vec![GroupKind::Thiol]);
        assert_eq!(kinds("ClCCl"), vec![GroupKind::Halogen, GroupKind::Halogen]);
        assert!(kinds("OP(=O)(O)O").contains(&GroupKind::Phosphate));
        assert!(kinds("CS(=O)(=O)C").contains(&GroupKind::Sulfonyl));
        assert_eq!(kinds("c1ccc2ccccc2c1"), vec![GroupKind::AromaticRing]);
        assert_eq!(kinds("C1CCC2CCCCC2C1"), vec![GroupKind::AliphaticRing]);
    }

    #[test]
    fn relabeled_acetic_acid_gives_same_rows() {
        let a = motif_matrix(&parse_smiles("CC(=O)O").unwrap());
        let b = motif_matrix(&parse_smiles("OC(C)=O").unwrap());
        let mut ra: Vec<Vec<f64>> = (0..a.len()).map(|i| a.rows.row(i).to_vec()).collect();
        let mut rb: Vec<Vec<f64>> = (0..b.len()).map(|i| b.rows.row(i).to_vec()).collect();
        ra.sort_by(|x, y| x.partial_cmp(y).unwrap());
        rb.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(ra, rb);
        assert!(a.group_refs.iter().any(|g| g.kind == GroupKind::Carboxyl));
    }

    #[test]
    fn overlapping_matches_merge_regardless_of_labels() {
        let g = parse_smiles("OC(O)C(N)(N)C(=O)OC(=O)C").unwrap();
        let n = g.atom_count();
        let rev: Vec<usize> = (0..n).rev().collect();
        let rows = |m: MotifMatrix| {
            let mut r: Vec<Vec<f64>> = (0..m.len()).map(|i| m.rows.row(i).to_vec()).collect();
            r.sort_by(|x, y| x.partial_cmp(y).unwrap());
            r
        };
        assert_eq!(rows(motif_matrix(&g)), rows(motif_matrix(&g.permuted(&rev))));
        let groups = detect_functional_groups(&g);
        for (i, a) in groups.iter().enumerate() {
            for b in &groups[i + 1..] {
                assert!(a.kind != b.kind || a.atom_indices.is_disjoint(&b.atom_indices));
            }
        }
    }

    #[test]
    fn catalog_override_restricts_kinds() {
        let catalog = Catalog::from_json(r#"[{"kind": "halogen", "elements": ["Cl"]}]"#).unwrap();
        let g = parse_smiles("FCCCl").unwrap();
        let groups = detect_with_catalog(&g, &catalog);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].atom_indices, BTreeSet::from([3]));
    }
}
