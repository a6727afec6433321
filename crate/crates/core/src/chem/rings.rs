use std::collections::VecDeque;

use super::MolecularGraph;

/// Bonds lying on at least one cycle (i.e. not bridges).
pub(super) fn ring_bonds(mol: &MolecularGraph) -> Vec<bool> {
    (0..mol.bonds.len())
        .map(|bi| {
            let (u, v) = mol.bonds[bi].endpoints;
            shortest_path(mol, u, v, Some(bi)).is_some()
        })
        .collect()
}

/// BFS path `from -> to` as an atom sequence, optionally skipping one bond.
fn shortest_path(mol: &MolecularGraph, from: usize, to: usize, skip: Option<usize>) -> Option<Vec<usize>> {
    let n = mol.atoms.len();
    let mut parent = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    seen[from] = true;
    queue.push_back(from);
    while let Some(a) = queue.pop_front() {
        if a == to {
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = parent[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &(nb, bi) in mol.neighbors(a) {
            if Some(bi) == skip || seen[nb] {
                continue;
            }
            seen[nb] = true;
            parent[nb] = a;
            queue.push_back(nb);
        }
    }
    None
}

fn bfs_tree(mol: &MolecularGraph, root: usize) -> (Vec<usize>, Vec<usize>) {
    let n = mol.atoms.len();
    let mut parent = vec![usize::MAX; n];
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    dist[root] = 0;
    queue.push_back(root);
    while let Some(a) = queue.pop_front() {
        for &(nb, _) in mol.neighbors(a) {
            if dist[nb] == usize::MAX {
                dist[nb] = dist[a] + 1;
                parent[nb] = a;
                queue.push_back(nb);
            }
        }
    }
    (parent, dist)
}

fn path_to_root(parent: &[usize], mut a: usize, root: usize) -> Vec<usize> {
    let mut out = vec![a];
    while a != root {
        a = parent[a];
        out.push(a);
    }
    out
}

/// Rotate/reflect a cycle so it starts at its smallest atom and proceeds
/// towards the smaller of that atom's two ring neighbours.
fn normalize_cycle(mut cycle: Vec<usize>) -> Vec<usize> {
    let min_pos = cycle.iter().enumerate().min_by_key(|(_, &a)| a).map(|(i, _)| i).unwrap();
    cycle.rotate_left(min_pos);
    if cycle.len() > 2 && cycle[cycle.len() - 1] < cycle[1] {
        cycle[1..].reverse();
    }
    cycle
}

/// Smallest set of smallest rings via Horton candidates and GF(2)
/// independence over bond incidence vectors.
pub(super) fn sssr(mol: &MolecularGraph) -> Vec<Vec<usize>> {
    let n = mol.atoms.len();
    let m = mol.bonds.len();
    if n == 0 || m + 1 <= n {
        return Vec::new();
    }
    let nullity = m + 1 - n;
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for root in 0..n {
        let (parent, dist) = bfs_tree(mol, root);
        for b in &mol.bonds {
            let (u, v) = b.endpoints;
            if dist[u] == usize::MAX || dist[v] == usize::MAX {
                continue;
            }
            if parent[u] == v || parent[v] == u {
                continue;
            }
            let pu = path_to_root(&parent, u, root);
            let pv = path_to_root(&parent, v, root);
            // paths must share only the root
            let shared = pu.iter().filter(|a| pv.contains(a)).count();
            if shared != 1 {
                continue;
            }
            let mut cycle = pu;
            cycle.pop();
            let mut forward: Vec<usize> = pv.iter().rev().copied().collect();
            forward.extend(cycle);
            candidates.push(normalize_cycle(forward));
        }
    }
    for bi in 0..m {
        let (u, v) = mol.bonds[bi].endpoints;
        if let Some(path) = shortest_path(mol, u, v, Some(bi)) {
            candidates.push(normalize_cycle(path));
        }
    }
    candidates.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    candidates.dedup();

    let words = m.div_ceil(64);
    let mut basis: Vec<Vec<u64>> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    let mut rings = Vec::new();
    for cycle in candidates {
        let mut vec = vec![0u64; words];
        let mut valid = true;
        for k in 0..cycle.len() {
            let a = cycle[k];
            let b = cycle[(k + 1) % cycle.len()];
            match mol.bond_between(a, b) {
                Some(bi) => vec[bi / 64] ^= 1 << (bi % 64),
                None => valid = false,
            }
        }
        if !valid {
            continue;
        }
        for (row, &p) in basis.iter().zip(&pivots) {
            if vec[p / 64] >> (p % 64) & 1 == 1 {
                for w in 0..words {
                    vec[w] ^= row[w];
                }
            }
        }
        if let Some(p) = (0..m).find(|&bit| vec[bit / 64] >> (bit % 64) & 1 == 1) {
            // keep the basis reduced so later candidates eliminate against all pivots
            for row in basis.iter_mut() {
                if row[p / 64] >> (p % 64) & 1 == 1 {
                    for w in 0..words {
                        row[w] ^= vec[w];
                    }
                }
            }
            basis.push(vec);
            pivots.push(p);
            rings.push(cycle);
            if rings.len() == nullity {
                break;
            }
        }
    }
    rings
}
