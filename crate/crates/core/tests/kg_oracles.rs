mod common;

use common::kg::{brute_force, build, NAMES, RELATIONS};
use hetmol::kg::{two_hop_edges, EntityKind};
use proptest::prelude::*;

fn random_kg() -> impl Strategy<Value = Vec<(usize, usize, usize)>> {
    prop::collection::vec((0..NAMES.len(), 0..RELATIONS.len(), 0..NAMES.len()), 1..70)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn two_hop_matches_path_oracle(raw in random_kg()) {
        let kg = build(&raw);
        prop_assert!(kg.entities.len() <= 30);
        for kinds in [
            (EntityKind::Element, EntityKind::Element),
            (EntityKind::FunctionalGroup, EntityKind::FunctionalGroup),
            (EntityKind::Element, EntityKind::FunctionalGroup),
        ] {
            let got: Vec<_> = two_hop_edges(&kg, kinds)
                .into_iter()
                .map(|e| (e.endpoints.0, e.endpoints.1, e.multiplicity_key.0, e.multiplicity_key.1 .0, e.multiplicity_key.1 .1))
                .collect();
            let want: Vec<_> = brute_force(&kg, kinds).into_keys().collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn triples_resolve_and_are_unique(raw in random_kg()) {
        let kg = build(&raw);
        let mut seen = std::collections::HashSet::new();
        for &(h, r, t) in &kg.triples {
            prop_assert!(h < kg.entities.len() && t < kg.entities.len() && r < kg.relations.len());
            prop_assert!(seen.insert((h, r, t)));
        }
        prop_assert_eq!(kg.triples.len() + kg.duplicates_dropped, raw.len());
    }
}

#[test]
fn random_kg_twenty_entities_sixty_triples() {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(20);
    let raw: Vec<(usize, usize, usize)> =
        (0..60).map(|_| (r.random_range(0..20), r.random_range(0..RELATIONS.len()), r.random_range(0..20))).collect();
    let kg = build(&raw);
    let kinds = (EntityKind::Element, EntityKind::Element);
    let got = two_hop_edges(&kg, kinds).len();
    assert_eq!(got, brute_force(&kg, kinds).len());
    assert!(got > 0);
}
