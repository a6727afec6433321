//! Batch invariants, random point clouds and frozen high-precision loss
//! references.

use std::collections::BTreeSet;

use hetmol::autodiff::{Tape, Tensor};
use hetmol::pretrain::{generate_batches, ViewProjections};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_points(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect()).collect()
}

// ---- clustering -------------------------------------------------------------

/// Batch-generation invariants on a random instance drawn from `seed`.
pub fn assert_batch_invariants(seed: u64) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n_batch = r.random_range(4..16);
    let slots = (0.3 * n_batch as f64).round() as usize;
    let n_random = r.random_range(0..=slots);
    let n_nd = r.random_range(n_batch - slots..60);
    let clusters = n_nd.div_ceil(n_batch - slots);
    let n_drug = clusters * (slots - n_random) + n_random + r.random_range(0..5);
    let pts = random_points(seed, n_nd + n_drug, 8);
    let non_drug: Vec<usize> = (0..n_nd).collect();
    let drug: Vec<usize> = (n_nd..n_nd + n_drug).collect();
    let batches = generate_batches(&non_drug, &drug, &pts, n_batch, n_random, seed).unwrap();
    assert_eq!(batches.len(), clusters);
    let mut nn_all = BTreeSet::new();
    let mut random_all = BTreeSet::new();
    let mut covered = BTreeSet::new();
    for b in &batches {
        assert_eq!(b.items.len(), n_batch, "seed {seed}");
        assert_eq!(b.drug_count, slots);
        assert_eq!(b.items.iter().collect::<BTreeSet<_>>().len(), n_batch);
        assert!(b.non_drug().iter().all(|i| *i < n_nd));
        assert!(b.drugs().iter().all(|i| *i >= n_nd));
        for &d in &b.nn_drugs {
            assert!(nn_all.insert(d), "neighbour drug reused");
        }
        random_all.extend(b.random_drugs.iter().copied());
        covered.extend(b.non_drug().iter().copied());
    }
    assert!(nn_all.is_disjoint(&random_all));
    assert_eq!(covered.len(), n_nd);
}

pub fn views(tape: &mut Tape, rows: &[(Vec<usize>, Vec<Vec<f64>>)]) -> Vec<ViewProjections> {
    rows.iter()
        .map(|(items, z)| ViewProjections { items: items.clone(), z: tape.constant(Tensor::from_rows(z).unwrap()).unwrap() })
        .collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn dyadic(f: impl Fn(usize, usize) -> f64, rows: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|r| (0..3).map(|c| f(r, c)).collect()).collect()
}

pub fn frozen_views(t: &mut Tape) -> Vec<ViewProjections> {
    let m = dyadic(|r, c| (((7 * r + 3 * c + 1) % 11) as f64 - 5.0) / 4.0, 6);
    let em = dyadic(|r, c| (((5 * r + 2 * c + 3) % 13) as f64 - 6.0) / 8.0, 6);
    let dm = dyadic(|r, c| (((3 * r + 5 * c + 2) % 7) as f64 - 3.0) / 2.0, 3);
    views(t, &[((0..6).collect(), m), ((0..6).collect(), em), (vec![1, 3, 4], dm)])
}

// 50-digit reference values for the dyadic inputs above (tau = 0.1).
pub const M_EM_ANCHORS: [f64; 6] = [
    0.1992259851501340119277371,
    7.166401700641253972287467,
    13.54887709801204015941885,
    7.681768008966962905030359,
    -8.433955668844283289525255,
    7.574416429324816499020705,
];
pub const M_DM_ANCHORS: [f64; 3] = [2.267538403652208159342646, 17.35633823742607295604931, 2.267538403652208159342646];
pub const DM_M_ANCHORS: [f64; 3] = [3.662967142581800796897252, 14.17451936711170648338318, 3.662967142581800796897252];
pub const VIEW_PAIRS: [f64; 3] = [10.38700865135981494697809, 14.46395623233526578397076, 20.03480281794731083100028];
pub const TOTAL: f64 = 44.88576770164239156194913;
pub const TOTAL_TAU_HALF: f64 = 14.75888971093473988587429;
