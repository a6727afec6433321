use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{BondOrder, ChemError, Element, MolecularGraph};

/// Conjunction of SMARTS-lite atom primitives; `None` fields are unconstrained.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct AtomConstraint {
    pub element: Option<Element>,
    pub aromatic: Option<bool>,
    /// Total hydrogen count (`H<n>`).
    pub total_h: Option<u32>,
    pub charge: Option<i32>,
    /// Ring membership (`R` / `R0`).
    pub ring: Option<bool>,
    /// Total connections including hydrogens (`X<n>`).
    pub connectivity: Option<u32>,
    /// Explicit heavy-atom degree (`D<n>`).
    pub degree: Option<u32>,
}

impl AtomConstraint {
    pub fn matches(&self, mol: &MolecularGraph, atom: usize) -> bool {
        let a = &mol.atoms[atom];
        let degree = mol.degree(atom) as u32;
        self.element.is_none_or(|e| e == a.element)
            && self.aromatic.is_none_or(|ar| ar == a.aromatic)
            && self.total_h.is_none_or(|h| h == a.explicit_h)
            && self.charge.is_none_or(|c| c == a.formal_charge)
            && self.ring.is_none_or(|r| r == a.ring_member)
            && self.connectivity.is_none_or(|x| x == degree + a.explicit_h)
            && self.degree.is_none_or(|d| d == degree)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondConstraint {
    /// Unwritten bond: single or aromatic.
    Default,
    Single,
    Double,
    Triple,
    Aromatic,
    Any,
    Ring,
}

impl BondConstraint {
    pub fn matches(self, mol: &MolecularGraph, bond: usize) -> bool {
        let b = &mol.bonds[bond];
        match self {
            BondConstraint::Default => matches!(b.order, BondOrder::Single | BondOrder::Aromatic),
            BondConstraint::Single => b.order == BondOrder::Single,
            BondConstraint::Double => b.order == BondOrder::Double,
            BondConstraint::Triple => b.order == BondOrder::Triple,
            BondConstraint::Aromatic => b.order == BondOrder::Aromatic,
            BondConstraint::Any => true,
            BondConstraint::Ring => b.ring_member,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmartsPattern {
    pub pattern_atoms: Vec<AtomConstraint>,
    /// `(a, b, constraint)` with `a < b` as written order.
    pub pattern_bonds: Vec<(usize, usize, BondConstraint)>,
    pub source_text: String,
}

impl SmartsPattern {
    fn adjacency(&self) -> Vec<Vec<(usize, BondConstraint)>> {
        let mut adj = vec![Vec::new(); self.pattern_atoms.len()];
        for &(a, b, c) in &self.pattern_bonds {
            adj[a].push((b, c));
            adj[b].push((a, c));
        }
        adj
    }
}

fn smarts_err(pattern: &str, reason: impl Into<String>) -> ChemError {
    ChemError::Smarts { pattern: pattern.to_string(), reason: reason.into() }
}

/// Parse the SMARTS-lite subset: organic/aromatic symbols, `*`, `a`, `A`,
/// bracket conjunctions of element, `#n`, `Hn`, `Xn`, `Dn`, `R`/`R0`, charge,
/// bonds `- = # : ~ @`, branches and ring closures.
pub fn parse_smarts(text: &str) -> Result<SmartsPattern, ChemError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(smarts_err(text, "empty pattern"));
    }
    let chars: Vec<char> = text.chars().collect();
    let mut atoms: Vec<AtomConstraint> = Vec::new();
    let mut bonds: Vec<(usize, usize, BondConstraint)> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut rings: BTreeMap<u32, (usize, Option<BondConstraint>)> = BTreeMap::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<BondConstraint> = None;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '(' => {
                stack.push(prev.ok_or_else(|| smarts_err(text, "branch before any atom"))?);
                i += 1;
            }
            ')' => {
                prev = Some(stack.pop().ok_or_else(|| smarts_err(text, "unbalanced `)`"))?);
                i += 1;
            }
            '-' | '=' | '#' | ':' | '~' | '@' => {
                pending = Some(match c {
                    '-' => BondConstraint::Single,
                    '=' => BondConstraint::Double,
                    '#' => BondConstraint::Triple,
                    ':' => BondConstraint::Aromatic,
                    '~' => BondConstraint::Any,
                    _ => BondConstraint::Ring,
                });
                i += 1;
            }
            '0'..='9' => {
                let label = c.to_digit(10).unwrap();
                let here = prev.ok_or_else(|| smarts_err(text, "ring closure before any atom"))?;
                let sym = pending.take();
                if let Some((opener, osym)) = rings.remove(&label) {
                    bonds.push((opener, here, sym.or(osym).unwrap_or(BondConstraint::Default)));
                } else {
                    rings.insert(label, (here, sym));
                }
                i += 1;
            }
            '[' => {
                let close = chars[i..]
                    .iter()
                    .position(|&ch| ch == ']')
                    .map(|o| i + o)
                    .ok_or_else(|| smarts_err(text, "unclosed `[`"))?;
                let body: String = chars[i + 1..close].iter().collect();
                let atom = parse_bracket_constraint(text, &body)?;
                push_atom(&mut atoms, &mut bonds, atom, &mut prev, &mut pending);
                i = close + 1;
            }
            '.' => return Err(smarts_err(text, "disconnected patterns are not supported")),
            _ => {
                let (atom, len) = bare_atom(text, &chars, i)?;
                push_atom(&mut atoms, &mut bonds, atom, &mut prev, &mut pending);
                i += len;
            }
        }
    }
    if !stack.is_empty() {
        return Err(smarts_err(text, "unbalanced `(`"));
    }
    if !rings.is_empty() {
        return Err(smarts_err(text, "unclosed ring bond"));
    }
    if atoms.is_empty() {
        return Err(smarts_err(text, "no atoms"));
    }
    Ok(SmartsPattern { pattern_atoms: atoms, pattern_bonds: bonds, source_text: text.to_string() })
}

fn push_atom(
    atoms: &mut Vec<AtomConstraint>,
    bonds: &mut Vec<(usize, usize, BondConstraint)>,
    atom: AtomConstraint,
    prev: &mut Option<usize>,
    pending: &mut Option<BondConstraint>,
) {
    let idx = atoms.len();
    atoms.push(atom);
    if let Some(p) = *prev {
        bonds.push((p, idx, pending.take().unwrap_or(BondConstraint::Default)));
    }
    *prev = Some(idx);
}

fn bare_atom(text: &str, chars: &[char], i: usize) -> Result<(AtomConstraint, usize), ChemError> {
    let c = chars[i];
    let next = chars.get(i + 1).copied();
    let mut ac = AtomConstraint::default();
    let len = match (c, next) {
        ('C', Some('l')) => {
            ac.element = Some(Element::Cl);
            ac.aromatic = Some(false);
            2
        }
        ('B', Some('r')) => {
            ac.element = Some(Element::Br);
            ac.aromatic = Some(false);
            2
        }
        ('*', _) => 1,
        ('a', _) => {
            ac.aromatic = Some(true);
            1
        }
        ('A', _) => {
            ac.aromatic = Some(false);
            1
        }
        _ => {
            let (e, arom) = letter_element(c).ok_or_else(|| smarts_err(text, format!("unsupported atom `{c}`")))?;
            ac.element = Some(e);
            ac.aromatic = Some(arom);
            1
        }
    };
    Ok((ac, len))
}

fn letter_element(c: char) -> Option<(Element, bool)> {
    let upper = c.to_ascii_uppercase().to_string();
    let e = Element::from_symbol(&upper)?;
    let aromatic = c.is_ascii_lowercase();
    if aromatic && !e.can_be_aromatic() {
        return None;
    }
    Some((e, aromatic))
}

fn parse_bracket_constraint(text: &str, body: &str) -> Result<AtomConstraint, ChemError> {
    let chars: Vec<char> = body.chars().filter(|&c| c != '&' && c != ';').collect();
    if body.contains(',') || body.contains('!') || body.contains('$') {
        return Err(smarts_err(text, "OR, NOT and recursive SMARTS are not supported"));
    }
    let mut ac = AtomConstraint::default();
    let mut i = 0;
    let read_num = |i: &mut usize| -> Option<u32> {
        let s = *i;
        while *i < chars.len() && chars[*i].is_ascii_digit() {
            *i += 1;
        }
        if *i > s {
            Some(chars[s..*i].iter().collect::<String>().parse().unwrap())
        } else {
            None
        }
    };
    let mut first = true;
    while i < chars.len() {
        let c = chars[i];
        i += 1;
        match c {
            '*' => {}
            'a' => ac.aromatic = Some(true),
            'A' => ac.aromatic = Some(false),
            '#' => {
                let z = read_num(&mut i).ok_or_else(|| smarts_err(text, "`#` needs an atomic number"))?;
                let e = Element::from_atomic_number(z as u8).ok_or_else(|| smarts_err(text, format!("unsupported atomic number {z}")))?;
                ac.element = Some(e);
            }
            'H' if !first => ac.total_h = Some(read_num(&mut i).unwrap_or(1)),
            'X' => ac.connectivity = Some(read_num(&mut i).unwrap_or(1)),
            'D' => ac.degree = Some(read_num(&mut i).unwrap_or(1)),
            'R' => ac.ring = Some(read_num(&mut i).is_none_or(|n| n > 0)),
            '+' | '-' => {
                let sign = if c == '+' { 1 } else { -1 };
                let mut mag = read_num(&mut i).map(|n| n as i32);
                if mag.is_none() {
                    let mut m = 1;
                    while i < chars.len() && chars[i] == c {
                        m += 1;
                        i += 1;
                    }
                    mag = Some(m);
                }
                ac.charge = Some(sign * mag.unwrap());
            }
            _ if c.is_ascii_alphabetic() => {
                let two = chars.get(i).filter(|n| n.is_ascii_lowercase()).map(|n| format!("{c}{n}"));
                if let Some(e) = two.as_deref().and_then(Element::from_symbol) {
                    i += 1;
                    ac.element = Some(e);
                    ac.aromatic = Some(false);
                } else {
                    let (e, arom) =
                        letter_element(c).ok_or_else(|| smarts_err(text, format!("unsupported primitive `{c}`")))?;
                    ac.element = Some(e);
                    ac.aromatic = Some(arom);
                }
            }
            _ => return Err(smarts_err(text, format!("unsupported primitive `{c}`"))),
        }
        first = false;
    }
    Ok(ac)
}

/// Connected search order: BFS from pattern atom 0, each later atom paired
/// with an already-placed neighbour.
fn search_order(pattern: &SmartsPattern) -> Option<Vec<(usize, Option<usize>)>> {
    let n = pattern.pattern_atoms.len();
    let adj = pattern.adjacency();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    order.push((0, None));
    while let Some(a) = queue.pop_front() {
        for &(b, _) in &adj[a] {
            if !seen[b] {
                seen[b] = true;
                order.push((b, Some(a)));
                queue.push_back(b);
            }
        }
    }
    (order.len() == n).then_some(order)
}

struct Search<'a> {
    pattern: &'a SmartsPattern,
    mol: &'a MolecularGraph,
    adj: Vec<Vec<(usize, BondConstraint)>>,
    order: Vec<(usize, Option<usize>)>,
    mapping: Vec<usize>,
    used: Vec<bool>,
    forbidden: Option<usize>,
}

impl Search<'_> {
    fn feasible(&self, p: usize, m: usize) -> bool {
        if self.used[m] || Some(m) == self.forbidden || !self.pattern.pattern_atoms[p].matches(self.mol, m) {
            return false;
        }
        self.adj[p].iter().all(|&(q, bc)| {
            let mq = self.mapping[q];
            mq == usize::MAX || self.mol.bond_between(m, mq).is_some_and(|bi| bc.matches(self.mol, bi))
        })
    }

    fn run(&mut self, depth: usize, sink: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if depth == self.order.len() {
            return sink(&self.mapping);
        }
        let (p, parent) = self.order[depth];
        let candidates: Vec<usize> = match parent {
            Some(q) => self.mol.neighbors(self.mapping[q]).iter().map(|&(n, _)| n).collect(),
            None => (0..self.mol.atom_count()).collect(),
        };
        for m in candidates {
            if self.feasible(p, m) {
                self.mapping[p] = m;
                self.used[m] = true;
                let stop = self.run(depth + 1, sink);
                self.used[m] = false;
                self.mapping[p] = usize::MAX;
                if stop {
                    return true;
                }
            }
        }
        false
    }
}

fn search<'a>(pattern: &'a SmartsPattern, mol: &'a MolecularGraph) -> Option<Search<'a>> {
    let order = search_order(pattern)?;
    Some(Search {
        pattern,
        mol,
        adj: pattern.adjacency(),
        order,
        mapping: vec![usize::MAX; pattern.pattern_atoms.len()],
        used: vec![false; mol.atom_count()],
        forbidden: None,
    })
}

/// Automorphisms of the pattern graph that preserve atom and bond constraints.
fn pattern_automorphisms(pattern: &SmartsPattern) -> Vec<Vec<usize>> {
    let n = pattern.pattern_atoms.len();
    let mut bond_map: BTreeMap<(usize, usize), BondConstraint> = BTreeMap::new();
    for &(a, b, c) in &pattern.pattern_bonds {
        bond_map.insert((a.min(b), a.max(b)), c);
    }
    let mut out = Vec::new();
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn rec(
        k: usize,
        pattern: &SmartsPattern,
        bonds: &BTreeMap<(usize, usize), BondConstraint>,
        perm: &mut Vec<usize>,
        used: &mut Vec<bool>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let n = perm.len();
        if k == n {
            out.push(perm.clone());
            return;
        }
        for t in 0..n {
            if used[t] || pattern.pattern_atoms[k] != pattern.pattern_atoms[t] {
                continue;
            }
            let ok = (0..k).all(|j| {
                let src = bonds.get(&(j.min(k), j.max(k)));
                let dst = bonds.get(&(perm[j].min(t), perm[j].max(t)));
                src == dst
            });
            if ok {
                perm[k] = t;
                used[t] = true;
                rec(k + 1, pattern, bonds, perm, used, out);
                used[t] = false;
            }
        }
    }
    rec(0, pattern, &bond_map, &mut perm, &mut used, &mut out);
    out
}

/// All embeddings of `pattern` in `mol` as atom indices in pattern-atom
/// order, one representative per pattern-automorphism class, sorted.
pub fn match_smarts(pattern: &SmartsPattern, mol: &MolecularGraph) -> Vec<Vec<usize>> {
    let Some(mut s) = search(pattern, mol) else {
        return Vec::new();
    };
    let autos = pattern_automorphisms(pattern);
    let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
    s.run(0, &mut |mapping: &[usize]| {
        let canonical = autos
            .iter()
            .map(|sigma| sigma.iter().map(|&t| mapping[t]).collect::<Vec<usize>>())
            .min()
            .unwrap_or_else(|| mapping.to_vec());
        found.insert(canonical);
        false
    });
    found.into_iter().collect()
}

/// Whether `pattern` embeds with its first atom on `anchor`, never touching
/// `forbidden`.
pub(crate) fn matches_anchored(pattern: &SmartsPattern, mol: &MolecularGraph, anchor: usize, forbidden: usize) -> bool {
    let Some(mut s) = search(pattern, mol) else {
        return false;
    };
    s.forbidden = Some(forbidden);
    if !s.feasible(0, anchor) {
        return false;
    }
    s.mapping[0] = anchor;
    s.used[anchor] = true;
    s.run(1, &mut |_| true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn parse_paper_style_pattern() {
        let p = parse_smarts("O[CH1][OX2H0]").unwrap();
        assert_eq!(p.pattern_atoms.len(), 3);
        assert_eq!(p.pattern_atoms[1].total_h, Some(1));
        assert_eq!(p.pattern_atoms[2].connectivity, Some(2));
        assert_eq!(p.pattern_atoms[2].total_h, Some(0));
        assert_eq!(p.pattern_bonds.len(), 2);
    }

    #[test]
    fn acetal_match() {
        let p = parse_smarts("O[CH1][OX2H0]").unwrap();
        let m = parse_smiles("COC(C)OC").unwrap();
        let hits = match_smarts(&p, &m);
        assert!(!hits.is_empty());
        assert!(hits.iter().all(|h| h[1] == 2));
        assert_eq!(hits, vec![vec![1, 2, 4], vec![4, 2, 1]]);
    }

    #[test]
    fn no_nitrogen() {
        let p = parse_smarts("N").unwrap();
        assert!(match_smarts(&p, &parse_smiles("CCO").unwrap()).is_empty());
    }

    #[test]
    fn automorphic_patterns_collapse() {
        let p = parse_smarts("CC").unwrap();
        let m = parse_smiles("CCC").unwrap();
        assert_eq!(match_smarts(&p, &m), vec![vec![0, 1], vec![1, 2]]);
        let ring = parse_smarts("c1ccccc1").unwrap();
        assert_eq!(match_smarts(&ring, &parse_smiles("c1ccccc1").unwrap()).len(), 1);
    }

    #[test]
    fn bracket_primitives() {
        let m = parse_smiles("C[N+](C)(C)C").unwrap();
        assert_eq!(match_smarts(&parse_smarts("[N+]").unwrap(), &m).len(), 1);
        assert_eq!(match_smarts(&parse_smarts("[#7;+1]").unwrap(), &m).len(), 1);
        assert!(match_smarts(&parse_smarts("[N-]").unwrap(), &m).is_empty());
        let r = parse_smiles("CC1CC1").unwrap();
        assert_eq!(match_smarts(&parse_smarts("[CR]").unwrap(), &r).len(), 3);
        assert_eq!(match_smarts(&parse_smarts("[CR0]").unwrap(), &r).len(), 1);
        assert_eq!(match_smarts(&parse_smarts("[CD3]").unwrap(), &r).len(), 1);
        assert_eq!(match_smarts(&parse_smarts("C@C").unwrap(), &r).len(), 3);
    }

    #[test]
    fn unsupported_syntax() {
        assert!(parse_smarts("[C,N]").is_err());
        assert!(parse_smarts("[!C]").is_err());
        assert!(parse_smarts("[$(CO)]").is_err());
        assert!(parse_smarts("C.C").is_err());
        assert!(parse_smarts("C(C").is_err());
    }

    #[test]
    fn anchored() {
        let m = parse_smiles("CC(=O)NC").unwrap();
        let carbonyl = parse_smarts("C=O").unwrap();
        assert!(matches_anchored(&carbonyl, &m, 1, 3));
        assert!(!matches_anchored(&carbonyl, &m, 0, 1));
        let n = parse_smarts("[NX3]").unwrap();
        assert!(matches_anchored(&n, &m, 3, 1));
    }
}
