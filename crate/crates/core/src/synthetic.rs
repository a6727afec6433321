//! Seeded toy datasets: SMILES chains, drug knowledge graphs and
//! interaction pairs.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::rng;

const LINKERS: &[&str] = &["C", "C", "CC", "O", "N", "S", "C(=O)", "C(C)", "c1ccccc1", "C1CC1", "C(F)", "N(C)", "c1ccncc1"];
const CAPS: &[&str] = &["C", "Cl", "F", "C#N", "O", "N", "C(=O)O", "Br"];

/// Random acyclic chains of ring and chain units, each parseable.
pub fn synthetic_smiles(count: usize, seed: u64) -> Vec<String> {
    let mut r = rng::stream(seed, "synthetic.smiles");
    (0..count)
        .map(|_| {
            let units = r.random_range(2..6);
            let mut s = String::from(*["C", "O", "N", "c1ccccc1"].choose(&mut r).expect("non-empty"));
            for _ in 0..units {
                s.push_str(LINKERS.choose(&mut r).expect("non-empty"));
            }
            s.push_str(CAPS.choose(&mut r).expect("non-empty"));
            s
        })
        .collect()
}

/// Drug ids in the `DB` + five digits form.
pub fn drug_ids(count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("DB{i:05}")).collect()
}

/// Interaction, target and category triples over `drugs`.
pub fn synthetic_drug_kg(drugs: &[String], seed: u64) -> Vec<(String, String, String)> {
    let mut r = rng::stream(seed, "synthetic.drug_kg");
    let mut triples = Vec::new();
    for (i, d) in drugs.iter().enumerate() {
        triples.push((d.clone(), "hasCategory".to_string(), format!("Category{}", i % 4)));
        for _ in 0..2 {
            triples.push((d.clone(), "targets".to_string(), format!("Protein{}", r.random_range(0..6))));
        }
        let other = &drugs[r.random_range(0..drugs.len())];
        if other != d {
            triples.push((d.clone(), "interactsWith".to_string(), other.clone()));
        }
    }
    triples
}

/// Labelled pairs over `n` molecules: label 1 when both members share the
/// given boolean property, so the pair task is learnable from structure.
pub fn synthetic_pairs(flags: &[bool], count: usize, seed: u64) -> Vec<(usize, usize, bool)> {
    let mut r = rng::stream(seed, "synthetic.pairs");
    let n = flags.len();
    let mut out: Vec<(usize, usize, bool)> = Vec::with_capacity(count);
    let mut want_pos = true;
    while out.len() < count {
        let a = r.random_range(0..n);
        let b = r.random_range(0..n);
        let label = flags[a] && flags[b];
        if a == b || label != want_pos || out.iter().any(|&(x, y, _)| (x, y) == (a, b)) {
            continue;
        }
        out.push((a, b, label));
        want_pos = !want_pos;
    }
    out
}
