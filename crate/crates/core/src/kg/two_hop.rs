use std::collections::BTreeSet;

use super::{EntityKind, KnowledgeGraph};
use crate::rng::fnv1a;

pub const RELATION_BUCKETS: usize = 16;
/// Intermediate kind one-hot followed by relation buckets.
pub const HOP_FEATURE_WIDTH: usize = EntityKind::ALL.len() + RELATION_BUCKETS;

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedEdge {
    pub endpoints: (usize, usize),
    pub hop_feature: Vec<f64>,
    /// `(intermediate, (relation on the first endpoint's side, relation on the second's))`.
    pub multiplicity_key: (usize, (usize, usize)),
}

/// Bucket of a relation name; name-based so layouts agree across graphs.
pub fn relation_bucket(name: &str) -> usize {
    (fnv1a(name.as_bytes()) % RELATION_BUCKETS as u64) as usize
}

fn hop_feature(kg: &KnowledgeGraph, via: usize, ra: usize, rb: usize) -> Vec<f64> {
    let mut f = vec![0.0; HOP_FEATURE_WIDTH];
    f[kg.kind(via).index()] = 1.0;
    let base = EntityKind::ALL.len();
    f[base + relation_bucket(kg.relation_name(ra))] = 1.0;
    f[base + relation_bucket(kg.relation_name(rb))] = 1.0;
    f
}

/// All 2-hop connections `a - x - b` between entities of the given kinds,
/// treating triples as undirected. One edge per distinct
/// `(x, relation pair)`. For equal kinds the pair is reported with
/// `a < b`; otherwise `a` has `kinds.0`. Sorted by `(a, b, x, ra, rb)`.
pub fn two_hop_edges(kg: &KnowledgeGraph, kinds: (EntityKind, EntityKind)) -> Vec<DerivedEdge> {
    let n = kg.entities.len();
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for &(h, r, t) in &kg.triples {
        if h == t {
            continue;
        }
        incident[h].push((t, r));
        incident[t].push((h, r));
    }
    let mut keys: BTreeSet<(usize, usize, usize, usize, usize)> = BTreeSet::new();
    for (x, inc) in incident.iter().enumerate() {
        for &(a, ra) in inc {
            if kg.kind(a) != kinds.0 {
                continue;
            }
            for &(b, rb) in inc {
                if a == b || kg.kind(b) != kinds.1 {
                    continue;
                }
                if kinds.0 == kinds.1 && a > b {
                    continue;
                }
                keys.insert((a, b, x, ra, rb));
            }
        }
    }
    keys.into_iter()
        .map(|(a, b, x, ra, rb)| DerivedEdge {
            endpoints: (a, b),
            hop_feature: hop_feature(kg, x, ra, rb),
            multiplicity_key: (x, (ra, rb)),
        })
        .collect()
}
