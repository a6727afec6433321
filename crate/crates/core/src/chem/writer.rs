use super::{BondOrder, MolecularGraph};

struct Plan {
    children: Vec<Vec<usize>>,
    /// Ring bonds opened at an atom (the earlier-written endpoint).
    opens: Vec<Vec<usize>>,
    closes: Vec<Vec<usize>>,
}

fn plan(mol: &MolecularGraph) -> Plan {
    let n = mol.atom_count();
    let mut plan = Plan { children: vec![Vec::new(); n], opens: vec![Vec::new(); n], closes: vec![Vec::new(); n] };
    let mut visited = vec![false; n];
    let mut tree_bond = vec![false; mol.bonds.len()];
    fn dfs(mol: &MolecularGraph, a: usize, visited: &mut [bool], tree: &mut [bool], plan: &mut Plan) {
        visited[a] = true;
        for &(nb, bi) in mol.neighbors(a) {
            if !visited[nb] {
                tree[bi] = true;
                plan.children[a].push(nb);
                dfs(mol, nb, visited, tree, plan);
            }
        }
    }
    if n > 0 {
        dfs(mol, 0, &mut visited, &mut tree_bond, &mut plan);
    }
    // preorder position decides which endpoint is written first
    let mut pos = vec![0usize; n];
    let mut order = Vec::new();
    fn pre(a: usize, plan: &Plan, order: &mut Vec<usize>) {
        order.push(a);
        for &c in &plan.children[a] {
            pre(c, plan, order);
        }
    }
    if n > 0 {
        pre(0, &plan, &mut order);
    }
    for (i, &a) in order.iter().enumerate() {
        pos[a] = i;
    }
    for (bi, b) in mol.bonds.iter().enumerate() {
        if tree_bond[bi] {
            continue;
        }
        let (u, v) = b.endpoints;
        let (first, second) = if pos[u] < pos[v] { (u, v) } else { (v, u) };
        plan.opens[first].push(bi);
        plan.closes[second].push(bi);
    }
    plan
}

fn atom_token(mol: &MolecularGraph, a: usize) -> String {
    let atom = &mol.atoms[a];
    let mut sym = atom.element.symbol().to_string();
    if atom.aromatic {
        sym = sym.to_ascii_lowercase();
    }
    let mut s = format!("[{sym}");
    match atom.explicit_h {
        0 => {}
        1 => s.push('H'),
        h => s.push_str(&format!("H{h}")),
    }
    match atom.formal_charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        q if q > 0 => s.push_str(&format!("+{q}")),
        q => s.push_str(&format!("-{}", -q)),
    }
    s.push(']');
    s
}

fn bond_token(mol: &MolecularGraph, bi: usize) -> &'static str {
    let b = &mol.bonds[bi];
    let both_aromatic = mol.atoms[b.endpoints.0].aromatic && mol.atoms[b.endpoints.1].aromatic;
    match b.order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic => "",
    }
}

fn ring_label(label: usize) -> String {
    if label < 10 {
        label.to_string()
    } else {
        format!("%{label:02}")
    }
}

/// Write a SMILES string with every atom bracketed (explicit H and charge),
/// returning it with the original atom index of each written atom.
pub fn write_smiles(mol: &MolecularGraph) -> (String, Vec<usize>) {
    let plan = plan(mol);
    let mut out = String::new();
    let mut order = Vec::new();
    let mut labels: Vec<Option<usize>> = vec![None; mol.bonds.len()];
    let mut free: Vec<bool> = vec![true; 100];
    fn emit(
        mol: &MolecularGraph,
        a: usize,
        plan: &Plan,
        out: &mut String,
        order: &mut Vec<usize>,
        labels: &mut [Option<usize>],
        free: &mut [bool],
    ) {
        order.push(a);
        out.push_str(&atom_token(mol, a));
        for &bi in &plan.closes[a] {
            let l = labels[bi].take().expect("ring opened before close");
            out.push_str(bond_token(mol, bi));
            out.push_str(&ring_label(l));
            free[l] = true;
        }
        for &bi in &plan.opens[a] {
            let l = (1..free.len()).find(|&l| free[l]).expect("ring labels exhausted");
            free[l] = false;
            labels[bi] = Some(l);
            out.push_str(&ring_label(l));
        }
        let kids = &plan.children[a];
        for (k, &c) in kids.iter().enumerate() {
            let bi = mol.bond_between(a, c).unwrap();
            let last = k + 1 == kids.len();
            if !last {
                out.push('(');
            }
            out.push_str(bond_token(mol, bi));
            emit(mol, c, plan, out, order, labels, free);
            if !last {
                out.push(')');
            }
        }
    }
    if mol.atom_count() > 0 {
        emit(mol, 0, &plan, &mut out, &mut order, &mut labels, &mut free);
    }
    (out, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn bracketed_output() {
        let m = parse_smiles("CCO").unwrap();
        assert_eq!(write_smiles(&m).0, "[CH3][CH2][OH]");
        let b = parse_smiles("c1ccccc1-c1ccccc1").unwrap();
        let (s, _) = write_smiles(&b);
        assert!(s.contains('-'));
        let again = parse_smiles(&s).unwrap();
        assert_eq!(again.bonds.len(), 13);
    }
}
