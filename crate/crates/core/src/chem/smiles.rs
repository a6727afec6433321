use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{Atom, Bond, BondOrder, ChemError, Element, MolecularGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
    /// `/` or `\`; treated as an unspecified bond.
    Directional,
}

struct RawAtom {
    element: Element,
    charge: i32,
    /// `Some` for bracket atoms, which never receive implicit hydrogens.
    bracket_h: Option<u32>,
    aromatic: bool,
}

struct RawBond {
    a: usize,
    b: usize,
    sym: Option<BondSym>,
    pos: usize,
}

/// Parse a single-component SMILES string.
pub fn parse_smiles(text: &str) -> Result<MolecularGraph, ChemError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(ChemError::Empty);
    }
    let chars: Vec<char> = text.chars().collect();
    let mut atoms: Vec<RawAtom> = Vec::new();
    let mut bonds: Vec<RawBond> = Vec::new();
    let mut branch_stack: Vec<usize> = Vec::new();
    let mut open_rings: BTreeMap<u32, (usize, Option<BondSym>, usize)> = BTreeMap::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<BondSym> = None;
    let mut pending_pos = 0usize;
    let mut stereo_seen = false;
    let mut i = 0usize;

    while i < chars.len() {
        let c = chars[i];
        match c {
            '(' => {
                let p = prev.ok_or(ChemError::UnbalancedBranch { pos: i })?;
                branch_stack.push(p);
                i += 1;
            }
            ')' => {
                if pending.is_some() {
                    return Err(ChemError::InvalidBond { pos: pending_pos, reason: "dangling bond" });
                }
                prev = Some(branch_stack.pop().ok_or(ChemError::UnbalancedBranch { pos: i })?);
                i += 1;
            }
            '.' => return Err(ChemError::MultiComponentInput { pos: i }),
            '-' | '=' | '#' | ':' | '/' | '\\' => {
                if pending.is_some() {
                    return Err(ChemError::InvalidBond { pos: i, reason: "two bond symbols in a row" });
                }
                pending = Some(match c {
                    '-' => BondSym::Single,
                    '=' => BondSym::Double,
                    '#' => BondSym::Triple,
                    ':' => BondSym::Aromatic,
                    _ => {
                        stereo_seen = true;
                        BondSym::Directional
                    }
                });
                pending_pos = i;
                i += 1;
            }
            '0'..='9' | '%' => {
                let start = i;
                let label = if c == '%' {
                    let digits: String = chars.iter().skip(i + 1).take(2).collect();
                    if digits.len() != 2 || !digits.chars().all(|d| d.is_ascii_digit()) {
                        return Err(ChemError::UnexpectedChar { ch: '%', pos: i });
                    }
                    i += 3;
                    digits.parse::<u32>().unwrap()
                } else {
                    i += 1;
                    c.to_digit(10).unwrap()
                };
                let here = prev.ok_or(ChemError::UnexpectedChar { ch: c, pos: start })?;
                let sym = pending.take();
                if let Some((opener, open_sym, _)) = open_rings.remove(&label) {
                    if opener == here {
                        return Err(ChemError::InvalidBond { pos: start, reason: "ring closure to self" });
                    }
                    let sym = match (open_sym, sym) {
                        (Some(a), Some(b)) if a != b => {
                            return Err(ChemError::InvalidBond { pos: start, reason: "conflicting ring bond symbols" })
                        }
                        (a, b) => b.or(a),
                    };
                    bonds.push(RawBond { a: opener, b: here, sym, pos: start });
                } else {
                    open_rings.insert(label, (here, sym, start));
                }
            }
            '[' => {
                let close = chars[i..]
                    .iter()
                    .position(|&ch| ch == ']')
                    .map(|off| i + off)
                    .ok_or(ChemError::UnexpectedChar { ch: '[', pos: i })?;
                let (atom, had_stereo) = parse_bracket(&chars[i + 1..close], i + 1)?;
                stereo_seen |= had_stereo;
                attach(&mut atoms, &mut bonds, atom, &mut prev, &mut pending, i);
                i = close + 1;
            }
            '*' => return Err(ChemError::UnknownElement { symbol: "*".into(), pos: i }),
            _ if c.is_ascii_alphabetic() => {
                let (element, aromatic, len) = organic_symbol(&chars, i)?;
                let atom = RawAtom { element, charge: 0, bracket_h: None, aromatic };
                attach(&mut atoms, &mut bonds, atom, &mut prev, &mut pending, i);
                i += len;
            }
            _ => return Err(ChemError::UnexpectedChar { ch: c, pos: i }),
        }
    }

    if pending.is_some() {
        return Err(ChemError::InvalidBond { pos: pending_pos, reason: "dangling bond" });
    }
    if let Some((&label, _)) = open_rings.iter().next() {
        return Err(ChemError::UnclosedRing { label });
    }
    if !branch_stack.is_empty() {
        return Err(ChemError::UnbalancedBranch { pos: chars.len() });
    }
    if stereo_seen {
        log::warn!("stereochemistry in `{text}` ignored");
    }
    finish(text, atoms, bonds)
}

fn attach(
    atoms: &mut Vec<RawAtom>,
    bonds: &mut Vec<RawBond>,
    atom: RawAtom,
    prev: &mut Option<usize>,
    pending: &mut Option<BondSym>,
    pos: usize,
) {
    let idx = atoms.len();
    atoms.push(atom);
    if let Some(p) = *prev {
        bonds.push(RawBond { a: p, b: idx, sym: pending.take(), pos });
    }
    *prev = Some(idx);
}

fn organic_symbol(chars: &[char], i: usize) -> Result<(Element, bool, usize), ChemError> {
    let c = chars[i];
    let next = chars.get(i + 1).copied();
    let two = match (c, next) {
        ('C', Some('l')) => Some(Element::Cl),
        ('B', Some('r')) => Some(Element::Br),
        _ => None,
    };
    if let Some(e) = two {
        return Ok((e, false, 2));
    }
    let (element, aromatic) = match c {
        'B' => (Element::B, false),
        'C' => (Element::C, false),
        'N' => (Element::N, false),
        'O' => (Element::O, false),
        'P' => (Element::P, false),
        'S' => (Element::S, false),
        'F' => (Element::F, false),
        'I' => (Element::I, false),
        'b' => (Element::B, true),
        'c' => (Element::C, true),
        'n' => (Element::N, true),
        'o' => (Element::O, true),
        'p' => (Element::P, true),
        's' => (Element::S, true),
        _ => {
            let mut symbol = c.to_string();
            if let Some(n) = next.filter(|n| n.is_ascii_lowercase()) {
                symbol.push(n);
            }
            return Err(ChemError::UnknownElement { symbol, pos: i });
        }
    };
    Ok((element, aromatic, 1))
}

fn parse_bracket(body: &[char], offset: usize) -> Result<(RawAtom, bool), ChemError> {
    let mut i = 0;
    while i < body.len() && body[i].is_ascii_digit() {
        i += 1; // isotope, discarded
    }
    let start = i;
    if i >= body.len() || !body[i].is_ascii_alphabetic() {
        let ch = body.get(i).copied().unwrap_or(']');
        return Err(ChemError::UnexpectedChar { ch, pos: offset + i });
    }
    let mut symbol = body[i].to_string();
    i += 1;
    if i < body.len() && body[i].is_ascii_lowercase() {
        let candidate = format!("{}{}", symbol, body[i]);
        if Element::from_symbol(&candidate).is_some() || body[start].is_ascii_uppercase() {
            symbol = candidate;
            i += 1;
        }
    }
    let aromatic = symbol.chars().next().unwrap().is_ascii_lowercase();
    let canonical = if aromatic {
        let mut s = symbol.clone();
        s.replace_range(0..1, &symbol[0..1].to_ascii_uppercase());
        s
    } else {
        symbol.clone()
    };
    let element = Element::from_symbol(&canonical)
        .filter(|e| !aromatic || e.can_be_aromatic())
        .ok_or(ChemError::UnknownElement { symbol: symbol.clone(), pos: offset + start })?;

    let mut stereo = false;
    while i < body.len() && body[i] == '@' {
        stereo = true;
        i += 1;
    }
    let mut h = 0u32;
    if i < body.len() && body[i] == 'H' {
        i += 1;
        h = 1;
        let ds = i;
        while i < body.len() && body[i].is_ascii_digit() {
            i += 1;
        }
        if i > ds {
            h = body[ds..i].iter().collect::<String>().parse().unwrap();
        }
    }
    let mut charge = 0i32;
    if i < body.len() && (body[i] == '+' || body[i] == '-') {
        let sign = if body[i] == '+' { 1 } else { -1 };
        let sc = body[i];
        i += 1;
        let mut mag = 1;
        let ds = i;
        while i < body.len() && body[i].is_ascii_digit() {
            i += 1;
        }
        if i > ds {
            mag = body[ds..i].iter().collect::<String>().parse().unwrap();
        } else {
            while i < body.len() && body[i] == sc {
                mag += 1;
                i += 1;
            }
        }
        charge = sign * mag;
    }
    if i < body.len() && body[i] == ':' {
        i += 1;
        while i < body.len() && body[i].is_ascii_digit() {
            i += 1; // atom class, discarded
        }
    }
    if i != body.len() {
        return Err(ChemError::UnexpectedChar { ch: body[i], pos: offset + i });
    }
    Ok((RawAtom { element, charge, bracket_h: Some(h), aromatic }, stereo))
}

fn finish(text: &str, raw_atoms: Vec<RawAtom>, raw_bonds: Vec<RawBond>) -> Result<MolecularGraph, ChemError> {
    let mut bonds = Vec::with_capacity(raw_bonds.len());
    let mut seen = std::collections::HashSet::new();
    for rb in &raw_bonds {
        let key = (rb.a.min(rb.b), rb.a.max(rb.b));
        if !seen.insert(key) {
            return Err(ChemError::InvalidBond { pos: rb.pos, reason: "duplicate bond" });
        }
        let both_aromatic = raw_atoms[rb.a].aromatic && raw_atoms[rb.b].aromatic;
        let order = match rb.sym {
            None | Some(BondSym::Directional) => {
                if both_aromatic {
                    BondOrder::Aromatic
                } else {
                    BondOrder::Single
                }
            }
            Some(BondSym::Single) => BondOrder::Single,
            Some(BondSym::Double) => BondOrder::Double,
            Some(BondSym::Triple) => BondOrder::Triple,
            Some(BondSym::Aromatic) => {
                if !both_aromatic {
                    return Err(ChemError::InvalidBond { pos: rb.pos, reason: "aromatic bond between non-aromatic atoms" });
                }
                BondOrder::Aromatic
            }
        };
        bonds.push(Bond { endpoints: (rb.a, rb.b), order, ring_member: false });
    }

    let mut valence_sum = vec![0u32; raw_atoms.len()];
    for b in &bonds {
        valence_sum[b.endpoints.0] += b.order.valence();
        valence_sum[b.endpoints.1] += b.order.valence();
    }

    let mut atoms = Vec::with_capacity(raw_atoms.len());
    for (idx, ra) in raw_atoms.iter().enumerate() {
        let sum = valence_sum[idx];
        let allowed = ra.element.allowed_valences(ra.charge);
        let explicit_h = match ra.bracket_h {
            Some(h) => {
                let max = allowed.iter().copied().max().unwrap_or(0);
                if sum + h > max {
                    return Err(ChemError::ValenceViolation { atom: idx, element: ra.element, valence: sum + h });
                }
                h
            }
            None => {
                let v = allowed
                    .iter()
                    .copied()
                    .find(|&v| v >= sum)
                    .ok_or(ChemError::ValenceViolation { atom: idx, element: ra.element, valence: sum })?;
                if ra.aromatic {
                    v.saturating_sub(sum + 1)
                } else {
                    v - sum
                }
            }
        };
        atoms.push(Atom {
            element: ra.element,
            formal_charge: ra.charge,
            explicit_h,
            aromatic: ra.aromatic,
            ring_member: false,
            index: idx,
        });
    }

    let mol = MolecularGraph::assemble(atoms, bonds, text.to_string());
    if let Some(a) = mol.atoms.iter().find(|a| a.aromatic && !a.ring_member) {
        return Err(ChemError::AromaticOutsideRing { atom: a.index });
    }
    Ok(mol)
}

/// One record of a SMILES list file.
#[derive(Debug, Clone, PartialEq)]
pub struct SmilesRecord {
    /// 1-based line number in the source file.
    pub line: usize,
    pub smiles: String,
    pub drug_id: Option<String>,
    /// Trailing label columns; empty fields are missing labels.
    pub labels: Vec<Option<f64>>,
}

/// Read `smiles[TAB]drug_id[TAB]label...` records; `#` lines are comments and
/// `-` or an empty field means no drug id.
pub fn read_smiles_list(path: impl AsRef<Path>) -> Result<Vec<SmilesRecord>, ChemError> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| ChemError::Io(e.to_string()))?;
    parse_smiles_list(&text)
}

pub(crate) fn parse_smiles_list(text: &str) -> Result<Vec<SmilesRecord>, ChemError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let mut cols = trimmed.split('\t');
        let smiles = cols.next().unwrap_or("").trim().to_string();
        let drug_id = cols
            .next()
            .map(str::trim)
            .filter(|s| !s.is_empty() && *s != "-")
            .map(str::to_string);
        let mut labels = Vec::new();
        for field in cols {
            let field = field.trim();
            if field.is_empty() {
                labels.push(None);
            } else {
                let v: f64 = field.parse().map_err(|_| ChemError::AtLine {
                    line: n + 1,
                    source: Box::new(ChemError::Io(format!("bad label `{field}`"))),
                })?;
                labels.push(Some(v));
            }
        }
        out.push(SmilesRecord { line: n + 1, smiles, drug_id, labels });
    }
    Ok(out)
}
