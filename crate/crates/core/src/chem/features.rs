use super::{Atom, Bond, Element, MolecularGraph};

pub const ATOM_FEATURE_WIDTH: usize = 25;
pub const BOND_FEATURE_WIDTH: usize = 5;

const MAX_DEGREE: usize = 5;
const MAX_H: usize = 4;

/// element(11) | degree 0..=5 (6) | charge/4 (1) | aromatic (1) | H 0..=4 (5) | ring (1)
pub fn atom_features(atom: &Atom, mol: &MolecularGraph) -> Vec<f64> {
    let mut f = vec![0.0; ATOM_FEATURE_WIDTH];
    f[atom.element.index()] = 1.0;
    let n_elem = Element::ALL.len();
    let degree = mol.degree(atom.index).min(MAX_DEGREE);
    f[n_elem + degree] = 1.0;
    let base = n_elem + MAX_DEGREE + 1;
    f[base] = (atom.formal_charge as f64 / 4.0).clamp(-1.0, 1.0);
    f[base + 1] = atom.aromatic as u8 as f64;
    f[base + 2 + (atom.explicit_h as usize).min(MAX_H)] = 1.0;
    f[base + 3 + MAX_H] = atom.ring_member as u8 as f64;
    f
}

/// order one-hot (single, double, triple, aromatic) | ring flag
pub fn bond_features(bond: &Bond) -> Vec<f64> {
    let mut f = vec![0.0; BOND_FEATURE_WIDTH];
    f[bond.order.index()] = 1.0;
    f[4] = bond.ring_member as u8 as f64;
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn methane_carbon() {
        let m = parse_smiles("C").unwrap();
        let f = atom_features(&m.atoms[0], &m);
        assert_eq!(f.len(), 25);
        assert_eq!(f[Element::C.index()], 1.0);
        assert_eq!(f[11], 1.0); // degree 0
        assert_eq!(f[17], 0.0); // charge
        assert_eq!(f[19 + 4], 1.0); // four hydrogens
        assert_eq!(f.iter().sum::<f64>(), 3.0);
    }

    #[test]
    fn ethanol_oxygen() {
        let m = parse_smiles("CCO").unwrap();
        let f = atom_features(&m.atoms[2], &m);
        assert_eq!(f[Element::O.index()], 1.0);
        assert_eq!(f[12], 1.0); // degree 1
        assert_eq!(f[18], 0.0); // not aromatic
        assert_eq!(f[20], 1.0); // one hydrogen
        assert_eq!(f[24], 0.0);
    }

    #[test]
    fn bonds() {
        let m = parse_smiles("CCO").unwrap();
        assert_eq!(bond_features(&m.bonds[0]), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let b = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(bond_features(&b.bonds[0]), vec![0.0, 0.0, 0.0, 1.0, 1.0]);
    }
}
