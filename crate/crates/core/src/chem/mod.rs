//! Molecular structure: SMILES parsing, ring perception, SMARTS-lite
//! matching, rule-driven fragmentation and per-atom/per-bond featurization.

mod brics;
mod features;
mod rings;
mod smarts;
mod smiles;
mod writer;

pub use brics::{brics_fragment, default_rules, load_rules, parse_rules, BricsRule, FragmentSet, Reaction};
pub use features::{atom_features, bond_features, ATOM_FEATURE_WIDTH, BOND_FEATURE_WIDTH};
pub use smarts::{match_smarts, parse_smarts, AtomConstraint, BondConstraint, SmartsPattern};
pub use smiles::{parse_smiles, read_smiles_list, SmilesRecord};
pub use writer::write_smiles;

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChemError {
    #[error("empty SMILES")]
    Empty,
    #[error("unknown element `{symbol}` at offset {pos}")]
    UnknownElement { symbol: String, pos: usize },
    #[error("ring closure {label} was never closed")]
    UnclosedRing { label: u32 },
    #[error("unbalanced branch at offset {pos}")]
    UnbalancedBranch { pos: usize },
    #[error("multi-component input (`.` at offset {pos}) is not supported")]
    MultiComponentInput { pos: usize },
    #[error("valence violation on atom {atom} ({element}): bond order sum {valence}")]
    ValenceViolation { atom: usize, element: Element, valence: u32 },
    #[error("unexpected character `{ch}` at offset {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("aromatic atom {atom} is not a ring member")]
    AromaticOutsideRing { atom: usize },
    #[error("invalid bond at offset {pos}: {reason}")]
    InvalidBond { pos: usize, reason: &'static str },
    #[error("SMARTS `{pattern}`: {reason}")]
    Smarts { pattern: String, reason: String },
    #[error("rule table line {line}: {reason}")]
    RuleTable { line: usize, reason: String },
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<ChemError>,
    },
    #[error("io: {0}")]
    Io(String),
}

/// The element subset accepted by the parser, in feature one-hot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    H,
    B,
    C,
    N,
    O,
    P,
    S,
    F,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 11] = [
        Element::H,
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::P,
        Element::S,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        Some(match symbol {
            "H" => Element::H,
            "B" => Element::B,
            "C" => Element::C,
            "N" => Element::N,
            "O" => Element::O,
            "P" => Element::P,
            "S" => Element::S,
            "F" => Element::F,
            "Cl" => Element::Cl,
            "Br" => Element::Br,
            "I" => Element::I,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::P => "P",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::H => 1,
            Element::B => 5,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::P => 15,
            Element::S => 16,
            Element::F => 9,
            Element::Cl => 17,
            Element::Br => 35,
            Element::I => 53,
        }
    }

    pub fn from_atomic_number(z: u8) -> Option<Element> {
        Element::ALL.into_iter().find(|e| e.atomic_number() == z)
    }

    /// Elements that may be written in lowercase (aromatic) form.
    pub fn can_be_aromatic(self) -> bool {
        matches!(self, Element::B | Element::C | Element::N | Element::O | Element::P | Element::S)
    }

    fn valence_electrons(self) -> i32 {
        match self {
            Element::H => 1,
            Element::B => 3,
            Element::C => 4,
            Element::N | Element::P => 5,
            Element::O | Element::S => 6,
            Element::F | Element::Cl | Element::Br | Element::I => 7,
        }
    }

    /// Allowed valences after adjusting for formal charge. Charged atoms take
    /// the valences of their isoelectronic neutral counterpart (N+ like C,
    /// O- like F, ...). Third-row and heavier atoms keep expanded octets.
    pub fn allowed_valences(self, charge: i32) -> Vec<u32> {
        if self == Element::H {
            return if charge == 0 { vec![1] } else { vec![0] };
        }
        let electrons = self.valence_electrons() - charge;
        if !(0..=8).contains(&electrons) {
            return Vec::new();
        }
        let base = if electrons <= 4 { electrons } else { 8 - electrons } as u32;
        let expanded = matches!(self, Element::P | Element::S | Element::Cl | Element::Br | Element::I);
        if !expanded || electrons <= 4 {
            return vec![base];
        }
        let mut out = vec![base];
        let mut v = base + 2;
        while v <= electrons as u32 {
            out.push(v);
            v += 2;
        }
        out
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i32,
    /// Total attached hydrogens, implicit ones materialized.
    pub explicit_h: u32,
    pub aromatic: bool,
    pub ring_member: bool,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn index(self) -> usize {
        self as usize
    }

    /// Contribution to the valence sum; aromatic bonds count as one and the
    /// missing half-order is handled by the implicit-H rule.
    pub fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bond {
    pub endpoints: (usize, usize),
    pub order: BondOrder,
    pub ring_member: bool,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.endpoints.0 == atom {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MolecularGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    /// Smallest set of smallest rings, as atom cycles.
    pub rings: Vec<Vec<usize>>,
    pub source_smiles: String,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolecularGraph {
    pub(crate) fn assemble(atoms: Vec<Atom>, bonds: Vec<Bond>, source_smiles: String) -> Self {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (bi, b) in bonds.iter().enumerate() {
            adjacency[b.endpoints.0].push((b.endpoints.1, bi));
            adjacency[b.endpoints.1].push((b.endpoints.0, bi));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let mut mol = MolecularGraph { atoms, bonds, rings: Vec::new(), source_smiles, adjacency };
        mol.rings = rings::sssr(&mol);
        let ring_bonds = rings::ring_bonds(&mol);
        for (bi, b) in mol.bonds.iter_mut().enumerate() {
            b.ring_member = ring_bonds[bi];
        }
        for ring in &mol.rings {
            for &a in ring {
                mol.atoms[a].ring_member = true;
            }
        }
        mol
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Same molecule with atom `i` moved to position `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> MolecularGraph {
        let mut atoms = self.atoms.clone();
        for (old, a) in self.atoms.iter().enumerate() {
            atoms[perm[old]] = Atom { index: perm[old], ring_member: false, ..a.clone() };
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond { endpoints: (perm[b.endpoints.0], perm[b.endpoints.1]), order: b.order, ring_member: false })
            .collect();
        MolecularGraph::assemble(atoms, bonds, self.source_smiles.clone())
    }

    /// `(neighbor, bond index)` pairs sorted by neighbor.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a].iter().find(|(n, _)| *n == b).map(|&(_, bi)| bi)
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.element != Element::H).count()
    }

    pub fn contains_element(&self, element: Element) -> bool {
        self.atoms.iter().any(|a| a.element == element)
    }

    /// Canonical line serialization used for determinism checks.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for a in &self.atoms {
            out.push_str(&format!(
                "A {} {} {} {} {}\n",
                a.element, a.formal_charge, a.explicit_h, a.aromatic as u8, a.ring_member as u8
            ));
        }
        for b in &self.bonds {
            out.push_str(&format!(
                "B {} {} {:?} {}\n",
                b.endpoints.0, b.endpoints.1, b.order, b.ring_member as u8
            ));
        }
        for r in &self.rings {
            let ids: Vec<String> = r.iter().map(|a| a.to_string()).collect();
            out.push_str(&format!("R {}\n", ids.join(",")));
        }
        out
    }
}
