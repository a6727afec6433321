//! Brute-force subgraph matching and the golden SMILES corpus.

use hetmol::chem::{default_rules, parse_smarts, AtomConstraint, BondConstraint, BondOrder, MolecularGraph, SmartsPattern};

pub const GOLDEN: &str = include_str!("../data/golden_smiles.tsv");

pub struct Golden {
    pub smiles: String,
    pub atoms: usize,
    pub bonds: usize,
    pub ring_sizes: Vec<usize>,
    pub hydrogens: Vec<u32>,
}

pub fn golden() -> Vec<Golden> {
    GOLDEN
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let c: Vec<&str> = l.split('\t').collect();
            let ring_sizes = if c[4] == "-" { Vec::new() } else { c[4].split(',').map(|x| x.parse().unwrap()).collect() };
            assert_eq!(ring_sizes.len(), c[3].parse::<usize>().unwrap());
            Golden {
                smiles: c[0].to_string(),
                atoms: c[1].parse().unwrap(),
                bonds: c[2].parse().unwrap(),
                ring_sizes,
                hydrogens: c[5].split(',').map(|x| x.parse().unwrap()).collect(),
            }
        })
        .collect()
}

fn oracle_atom_ok(c: &AtomConstraint, mol: &MolecularGraph, i: usize) -> bool {
    let a = &mol.atoms[i];
    let deg = mol.bonds.iter().filter(|b| b.endpoints.0 == i || b.endpoints.1 == i).count() as u32;
    if let Some(e) = c.element {
        if e != a.element {
            return false;
        }
    }
    if let Some(ar) = c.aromatic {
        if ar != a.aromatic {
            return false;
        }
    }
    if let Some(h) = c.total_h {
        if h != a.explicit_h {
            return false;
        }
    }
    if let Some(q) = c.charge {
        if q != a.formal_charge {
            return false;
        }
    }
    if let Some(r) = c.ring {
        let in_ring = mol.rings.iter().any(|ring| ring.contains(&i));
        if r != in_ring {
            return false;
        }
    }
    if let Some(x) = c.connectivity {
        if x != deg + a.explicit_h {
            return false;
        }
    }
    if let Some(d) = c.degree {
        if d != deg {
            return false;
        }
    }
    true
}

fn oracle_bond_ok(c: BondConstraint, mol: &MolecularGraph, u: usize, v: usize) -> bool {
    let Some(b) = mol.bonds.iter().find(|b| b.endpoints == (u, v) || b.endpoints == (v, u)) else {
        return false;
    };
    match c {
        BondConstraint::Default => b.order == BondOrder::Single || b.order == BondOrder::Aromatic,
        BondConstraint::Single => b.order == BondOrder::Single,
        BondConstraint::Double => b.order == BondOrder::Double,
        BondConstraint::Triple => b.order == BondOrder::Triple,
        BondConstraint::Aromatic => b.order == BondOrder::Aromatic,
        BondConstraint::Any => true,
        BondConstraint::Ring => b.ring_member,
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Every embedding of `p` in `mol`, one per pattern automorphism class.
pub fn brute_force(p: &SmartsPattern, mol: &MolecularGraph) -> Vec<Vec<usize>> {
    let k = p.pattern_atoms.len();
    let n = mol.atoms.len();
    let mut all = Vec::new();
    let mut cur = vec![0usize; k];
    fn rec(d: usize, k: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if d == k {
            out.push(cur.clone());
            return;
        }
        for m in 0..n {
            if !cur[..d].contains(&m) {
                cur[d] = m;
                rec(d + 1, k, n, cur, out);
            }
        }
    }
    rec(0, k, n, &mut cur, &mut all);
    let valid: Vec<Vec<usize>> = all
        .into_iter()
        .filter(|f| {
            (0..k).all(|i| oracle_atom_ok(&p.pattern_atoms[i], mol, f[i]))
                && p.pattern_bonds.iter().all(|&(a, b, c)| oracle_bond_ok(c, mol, f[a], f[b]))
        })
        .collect();
    // automorphisms by exhaustive permutation
    let bond_of = |a: usize, b: usize| {
        p.pattern_bonds.iter().find(|&&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a)).map(|t| t.2)
    };
    let autos: Vec<Vec<usize>> = permutations(k)
        .into_iter()
        .filter(|s| {
            (0..k).all(|i| p.pattern_atoms[i] == p.pattern_atoms[s[i]])
                && (0..k).all(|i| (0..k).all(|j| bond_of(i, j) == bond_of(s[i], s[j])))
        })
        .collect();
    let mut canon: Vec<Vec<usize>> = valid
        .iter()
        .map(|f| autos.iter().map(|s| s.iter().map(|&t| f[t]).collect::<Vec<_>>()).min().unwrap())
        .collect();
    canon.sort();
    canon.dedup();
    canon
}

/// The shipped rule table plus extra patterns that exercise each constraint.
pub fn oracle_patterns() -> Vec<SmartsPattern> {
    let mut pats: Vec<SmartsPattern> = Vec::new();
    for r in default_rules() {
        pats.push(r.left);
        pats.push(r.right);
    }
    for s in [
        "O[CH1][OX2H0]", "C=O", "CC", "c1ccccc1", "[OX2H1]", "C(=O)O", "[#7]", "N", "cc", "C~C~C", "C@C", "[CD2]",
        "S(=O)(=O)N", "C#N", "[N+](=O)[O-]", "[CR0X4]", "ccc", "C(C)(C)C",
    ] {
        pats.push(parse_smarts(s).unwrap());
    }
    pats
}

