use std::collections::{BTreeMap, HashSet};

use super::{Atom, Bond, BondOrder, BondStereo, Element, SmilesError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BondSymbol {
    Single,
    Double,
    Triple,
    Aromatic,
    Up,
    Down,
}

impl BondSymbol {
    fn order(self) -> BondOrder {
        match self {
            BondSymbol::Single | BondSymbol::Up | BondSymbol::Down => BondOrder::Single,
            BondSymbol::Double => BondOrder::Double,
            BondSymbol::Triple => BondOrder::Triple,
            BondSymbol::Aromatic => BondOrder::Aromatic,
        }
    }

    fn stereo(self) -> Option<BondStereo> {
        match self {
            BondSymbol::Up => Some(BondStereo::Up),
            BondSymbol::Down => Some(BondStereo::Down),
            _ => None,
        }
    }
}

struct RingOpen {
    atom: usize,
    bond: Option<BondSymbol>,
    offset: usize,
}

pub(super) struct Parsed {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    /// Atoms written inside brackets keep their explicit hydrogen count.
    pub bracketed: Vec<bool>,
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bracketed: Vec<bool>,
    bonds: Vec<Bond>,
    bond_pairs: HashSet<(usize, usize)>,
    prev: Option<usize>,
    pending: Option<(BondSymbol, usize)>,
    branches: Vec<(usize, usize)>,
    rings: BTreeMap<u32, RingOpen>,
}

pub(super) fn parse(text: &str) -> Result<Parsed, SmilesError> {
    if text.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    if let Some(offset) = text.bytes().position(|b| !b.is_ascii()) {
        return Err(SmilesError::NonAscii { offset });
    }
    let mut p = Parser {
        bytes: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bracketed: Vec::new(),
        bonds: Vec::new(),
        bond_pairs: HashSet::new(),
        prev: None,
        pending: None,
        branches: Vec::new(),
        rings: BTreeMap::new(),
    };
    p.run()?;
    Ok(Parsed { atoms: p.atoms, bonds: p.bonds, bracketed: p.bracketed })
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek() {
            let offset = self.pos;
            match c {
                b'(' => {
                    let Some(prev) = self.prev else {
                        return Err(SmilesError::UnexpectedCharacter { offset, found: '(' });
                    };
                    if self.pending.is_some() {
                        return Err(SmilesError::InvalidBond { offset, reason: "bond symbol before branch" });
                    }
                    self.branches.push((prev, offset));
                    self.pos += 1;
                }
                b')' => {
                    if self.pending.is_some() {
                        return Err(SmilesError::InvalidBond { offset, reason: "bond symbol before ')'" });
                    }
                    let Some((atom, _)) = self.branches.pop() else {
                        return Err(SmilesError::UnbalancedParenthesis { offset });
                    };
                    self.prev = Some(atom);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.pending.is_some() {
                        return Err(SmilesError::InvalidBond { offset, reason: "two consecutive bond symbols" });
                    }
                    let sym = match c {
                        b'-' => BondSymbol::Single,
                        b'=' => BondSymbol::Double,
                        b'#' => BondSymbol::Triple,
                        b':' => BondSymbol::Aromatic,
                        b'/' => BondSymbol::Up,
                        _ => BondSymbol::Down,
                    };
                    self.pending = Some((sym, offset));
                    self.pos += 1;
                }
                b'.' => {
                    if self.pending.is_some() {
                        return Err(SmilesError::InvalidBond { offset, reason: "bond symbol before '.'" });
                    }
                    if self.prev.is_none() || !self.branches.is_empty() {
                        return Err(SmilesError::UnexpectedCharacter { offset, found: '.' });
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' => {
                    self.pos += 1;
                    self.ring_bond((c - b'0') as u32, offset)?;
                }
                b'%' => {
                    let digits = self.bytes.get(self.pos + 1..self.pos + 3);
                    match digits {
                        Some(d) if d.iter().all(u8::is_ascii_digit) => {
                            let n = ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32;
                            self.pos += 3;
                            self.ring_bond(n, offset)?;
                        }
                        _ => return Err(SmilesError::UnexpectedCharacter { offset, found: '%' }),
                    }
                }
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom, true, offset)?;
                }
                c if c.is_ascii_alphabetic() || c == b'*' => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom, false, offset)?;
                }
                other => {
                    return Err(SmilesError::UnexpectedCharacter { offset, found: other as char });
                }
            }
        }
        if let Some((_, offset)) = self.pending {
            return Err(SmilesError::InvalidBond { offset, reason: "bond symbol at end of input" });
        }
        if let Some(&(_, offset)) = self.branches.last() {
            return Err(SmilesError::UnbalancedParenthesis { offset });
        }
        if let Some(offset) = self.rings.values().map(|r| r.offset).min() {
            return Err(SmilesError::UnmatchedRingClosure { offset });
        }
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].is_aromatic && self.atoms[b].is_aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn add_bond(&mut self, a: usize, b: usize, sym: Option<BondSymbol>, offset: usize) -> Result<(), SmilesError> {
        if a == b {
            return Err(SmilesError::InvalidBond { offset, reason: "atom bonded to itself" });
        }
        let key = (a.min(b), a.max(b));
        if !self.bond_pairs.insert(key) {
            return Err(SmilesError::InvalidBond { offset, reason: "duplicate bond" });
        }
        let order = sym.map_or_else(|| self.default_order(a, b), BondSymbol::order);
        self.bonds.push(Bond {
            begin: a,
            end: b,
            order,
            stereo: sym.and_then(BondSymbol::stereo),
        });
        Ok(())
    }

    fn add_atom(&mut self, atom: Atom, bracketed: bool, offset: usize) -> Result<(), SmilesError> {
        self.atoms.push(atom);
        self.bracketed.push(bracketed);
        let idx = self.atoms.len() - 1;
        let pending = self.pending.take();
        match self.prev {
            Some(prev) => self.add_bond(prev, idx, pending.map(|p| p.0), offset)?,
            None => {
                if let Some((_, off)) = pending {
                    return Err(SmilesError::InvalidBond { offset: off, reason: "bond symbol without a preceding atom" });
                }
            }
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn ring_bond(&mut self, number: u32, offset: usize) -> Result<(), SmilesError> {
        let Some(atom) = self.prev else {
            return Err(SmilesError::UnexpectedCharacter {
                offset,
                found: self.bytes[offset] as char,
            });
        };
        let pending = self.pending.take().map(|p| p.0);
        match self.rings.remove(&number) {
            Some(open) => {
                let sym = match (open.bond, pending) {
                    (Some(a), Some(b)) if a.order() != b.order() => {
                        return Err(SmilesError::InvalidBond { offset, reason: "conflicting ring-closure bond symbols" });
                    }
                    (Some(a), _) => Some(a),
                    (None, b) => b,
                };
                self.add_bond(open.atom, atom, sym, offset)
            }
            None => {
                self.rings.insert(number, RingOpen { atom, bond: pending, offset });
                Ok(())
            }
        }
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let c = self.bytes[start];
        let next = self.bytes.get(start + 1).copied();
        let (element, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => (Some(Element::CL), false, 2),
            (b'B', Some(b'r')) => (Some(Element::BR), false, 2),
            (b'B', _) => (Some(Element::B), false, 1),
            (b'C', _) => (Some(Element::C), false, 1),
            (b'N', _) => (Some(Element::N), false, 1),
            (b'O', _) => (Some(Element::O), false, 1),
            (b'P', _) => (Some(Element::P), false, 1),
            (b'S', _) => (Some(Element::S), false, 1),
            (b'F', _) => (Some(Element::F), false, 1),
            (b'I', _) => (Some(Element::I), false, 1),
            (b'b', _) => (Some(Element::B), true, 1),
            (b'c', _) => (Some(Element::C), true, 1),
            (b'n', _) => (Some(Element::N), true, 1),
            (b'o', _) => (Some(Element::O), true, 1),
            (b'p', _) => (Some(Element::P), true, 1),
            (b's', _) => (Some(Element::S), true, 1),
            _ => (None, false, 1),
        };
        let Some(element) = element else {
            let mut end = start + 1;
            if c.is_ascii_uppercase() && next.is_some_and(|n| n.is_ascii_lowercase()) {
                end += 1;
            }
            return Err(SmilesError::UnknownElement {
                offset: start,
                symbol: String::from_utf8_lossy(&self.bytes[start..end]).into_owned(),
            });
        };
        self.pos += len;
        Ok(Atom {
            element,
            formal_charge: 0,
            is_aromatic: aromatic,
            hydrogen_count: 0,
            isotope: None,
            chirality: None,
        })
    }

    fn read_number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        (self.pos > start).then(|| {
            std::str::from_utf8(&self.bytes[start..self.pos])
                .ok()
                .and_then(|s| s.parse().ok())
                .unwrap_or(u32::MAX)
        })
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        self.pos += 1;
        let bad = |offset| SmilesError::InvalidBracketAtom { offset };

        let isotope = match self.read_number() {
            Some(0) => return Err(bad(open)),
            Some(n) => Some(u16::try_from(n).map_err(|_| bad(open))?),
            None => None,
        };

        let sym_start = self.pos;
        let c = self.peek().ok_or(bad(open))?;
        let next = self.bytes.get(sym_start + 1).copied();
        let (element, aromatic, len) = if c.is_ascii_lowercase() {
            match (c, next) {
                (b's', Some(b'e')) => (Element::from_symbol("Se"), true, 2),
                (b'a', Some(b's')) => (Element::from_symbol("As"), true, 2),
                (b'b', _) => (Some(Element::B), true, 1),
                (b'c', _) => (Some(Element::C), true, 1),
                (b'n', _) => (Some(Element::N), true, 1),
                (b'o', _) => (Some(Element::O), true, 1),
                (b'p', _) => (Some(Element::P), true, 1),
                (b's', _) => (Some(Element::S), true, 1),
                _ => (None, false, 1),
            }
        } else if c.is_ascii_uppercase() {
            let two = next
                .filter(u8::is_ascii_lowercase)
                .and_then(|n| Element::from_symbol(&format!("{}{}", c as char, n as char)));
            match two {
                Some(e) => (Some(e), false, 2),
                None => (Element::from_symbol(&(c as char).to_string()), false, 1),
            }
        } else if c == b'*' {
            (None, false, 1)
        } else {
            return Err(bad(open));
        };
        let Some(element) = element else {
            let mut end = sym_start + 1;
            if next.is_some_and(|n| n.is_ascii_lowercase()) {
                end += 1;
            }
            return Err(SmilesError::UnknownElement {
                offset: sym_start,
                symbol: String::from_utf8_lossy(&self.bytes[sym_start..end]).into_owned(),
            });
        };
        self.pos += len;

        let mut chirality = None;
        if self.peek() == Some(b'@') {
            let start = self.pos;
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            } else if self.peek().is_some_and(|c| c.is_ascii_uppercase() && c != b'H') {
                while self.peek().is_some_and(|c| c.is_ascii_uppercase()) {
                    self.pos += 1;
                }
                self.read_number();
            }
            chirality = Some(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned());
        }

        let mut hydrogen_count = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hydrogen_count = match self.read_number() {
                Some(n) => u8::try_from(n).map_err(|_| bad(open))?,
                None => 1,
            };
        }

        let mut formal_charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            match self.read_number() {
                Some(n) => formal_charge = unit * n.min(99) as i32,
                None => {
                    formal_charge = unit;
                    while self.peek() == Some(sign) {
                        self.pos += 1;
                        formal_charge += unit;
                    }
                }
            }
            if formal_charge.abs() > 4 {
                return Err(bad(open));
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.read_number().is_none() {
                return Err(bad(open));
            }
        }

        if self.peek() != Some(b']') {
            return Err(bad(open));
        }
        self.pos += 1;

        Ok(Atom {
            element,
            formal_charge: formal_charge as i8,
            is_aromatic: aromatic,
            hydrogen_count,
            isotope,
            chirality,
        })
    }
}
