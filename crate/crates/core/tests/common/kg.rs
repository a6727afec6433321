//! Path-enumeration oracle for two-hop knowledge edges.

use std::collections::BTreeMap;

use hetmol::kg::{EntityKind, KnowledgeGraph};

pub const NAMES: [&str; 30] = [
    "C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "H", "Acetal", "Nitro", "Nitrile", "Phenyl", "Alkyl", "Weight1",
    "Weight2", "Period2", "Period3", "Group14", "Halogen", "Nonmetals", "Polar", "Basic", "X1", "X2", "X3", "X4",
    "X5", "X6",
];
pub const RELATIONS: [&str; 6] = ["isPartOf", "hasWeight", "isInPeriod", "isA", "isSubClassOf", "near"];

/// Every ordered pair of distinct triples sharing an entity is a candidate
/// path; keep those whose free ends have the requested kinds.
pub fn brute_force(kg: &KnowledgeGraph, kinds: (EntityKind, EntityKind)) -> BTreeMap<(usize, usize, usize, usize, usize), usize> {
    let mut out = BTreeMap::new();
    let ends = |&(h, _, t): &(usize, usize, usize)| [(h, t), (t, h)];
    for (i, t1) in kg.triples.iter().enumerate() {
        for (j, t2) in kg.triples.iter().enumerate() {
            if i == j {
                continue;
            }
            for (a, x) in ends(t1) {
                for (x2, b) in ends(t2) {
                    if x != x2 || a == b || a == x || b == x {
                        continue;
                    }
                    let (ra, rb) = (t1.1, t2.1);
                    let key = if kinds.0 == kinds.1 {
                        if kg.kind(a) != kinds.0 || kg.kind(b) != kinds.0 {
                            continue;
                        }
                        if a < b { (a, b, x, ra, rb) } else { (b, a, x, rb, ra) }
                    } else if kg.kind(a) == kinds.0 && kg.kind(b) == kinds.1 {
                        (a, b, x, ra, rb)
                    } else {
                        continue;
                    };
                    out.insert(key, 1);
                }
            }
        }
    }
    out
}

/// Knowledge graph over the fixed name and relation pools.
pub fn build(raw: &[(usize, usize, usize)]) -> KnowledgeGraph {
    KnowledgeGraph::from_triples(raw.iter().map(|&(h, r, t)| (NAMES[h], RELATIONS[r], NAMES[t])))
}
