//! Batch generation and contrastive-loss oracles.

use hetmol::autodiff::{Tape, Tensor};
use hetmol::encoder::{Encoder, EncoderConfig};
use hetmol::chem::parse_smiles;
use hetmol::hmg::TypeDims;
use hetmol::pretrain::{
    anchor_losses, constrained_kmeans, fingerprint, generate_batches, nearest_neighbors, pair_loss, squared_distance,
    total_loss, view_pair_loss, PretrainError, Projector, ViewProjections,
};
use hetmol::autodiff::ParamStore;
use proptest::prelude::*;

mod common;

use common::pretrain::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn ten_points_capacity_five_split_evenly() {
    let c = constrained_kmeans(&random_points(1, 10, 3), 5, 0).unwrap();
    assert_eq!(c.centers.len(), 2);
    assert_eq!((c.members(0).len(), c.members(1).len()), (5, 5));
}

#[test]
fn identical_points_have_zero_objective() {
    let pts = vec![vec![0.5, -1.0]; 7];
    let c = constrained_kmeans(&pts, 3, 9).unwrap();
    assert_eq!(c.objective, 0.0);
    assert!((0..3).all(|k| c.members(k).len() <= 3));
    assert!(matches!(constrained_kmeans(&[], 3, 0), Err(PretrainError::EmptyInput)));
}

/// Best objective over every split of six points into two groups of three.
fn exhaustive_optimum(pts: &[Vec<f64>]) -> f64 {
    let cost = |group: &[usize]| -> f64 {
        let dim = pts[0].len();
        let mean: Vec<f64> = (0..dim).map(|c| group.iter().map(|&i| pts[i][c]).sum::<f64>() / group.len() as f64).collect();
        group.iter().map(|&i| squared_distance(&pts[i], &mean)).sum()
    };
    let mut best = f64::INFINITY;
    for mask in 0u32..64 {
        if mask.count_ones() != 3 {
            continue;
        }
        let a: Vec<usize> = (0..6).filter(|i| mask >> i & 1 == 1).collect();
        let b: Vec<usize> = (0..6).filter(|i| mask >> i & 1 == 0).collect();
        best = best.min(cost(&a) + cost(&b));
    }
    best
}

#[test]
fn six_points_within_ten_percent_of_exhaustive_optimum() {
    for seed in 0..100 {
        let pts = random_points(seed, 6, 2);
        let c = constrained_kmeans(&pts, 3, seed).unwrap();
        let opt = exhaustive_optimum(&pts);
        assert!(c.objective <= 1.1 * opt + 1e-12, "seed {seed}: {} vs {opt}", c.objective);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn capacity_is_never_exceeded(n in 1usize..40, cap in 1usize..9, seed in 0u64..1000) {
        let c = constrained_kmeans(&random_points(seed, n, 4), cap, seed).unwrap();
        prop_assert_eq!(c.assignment.len(), n);
        prop_assert_eq!(c.centers.len(), n.div_ceil(cap));
        for k in 0..c.centers.len() {
            prop_assert!(c.members(k).len() <= cap);
        }
    }
}

#[test]
fn nearest_neighbors_equal_full_sort() {
    let pts = random_points(3, 30, 5);
    let cands: Vec<usize> = (5..25).collect();
    let center = vec![0.1; 5];
    let mut oracle = cands.clone();
    oracle.sort_by(|&a, &b| squared_distance(&center, &pts[a]).total_cmp(&squared_distance(&center, &pts[b])));
    for k in [0, 1, 7, 20] {
        assert_eq!(nearest_neighbors(&center, &cands, &pts, k).unwrap(), oracle[..k].to_vec());
    }
    assert!(matches!(
        nearest_neighbors(&center, &cands, &pts, 21),
        Err(PretrainError::InsufficientCandidates { needed: 21, available: 20 })
    ));
}

#[test]
fn fingerprints_are_binary_and_discriminate() {
    let a = fingerprint(&parse_smiles("CCO").unwrap());
    let b = fingerprint(&parse_smiles("c1ccccc1N").unwrap());
    assert_eq!(a.len(), 128);
    assert!(a.iter().all(|&x| x == 0.0 || x == 1.0));
    assert_ne!(a, b);
    assert_eq!(a, fingerprint(&parse_smiles("OCC").unwrap()));
}

// ---- batches ----------------------------------------------------------------

#[test]
fn fourteen_plus_eight_gives_two_batches_of_ten() {
    let pts = random_points(5, 22, 6);
    let non_drug: Vec<usize> = (0..14).collect();
    let drug: Vec<usize> = (14..22).collect();
    let batches = generate_batches(&non_drug, &drug, &pts, 10, 1, 0).unwrap();
    assert_eq!(batches.len(), 2);
    for b in &batches {
        assert_eq!(b.items.len(), 10);
        assert_eq!((b.non_drug().len(), b.nn_drugs.len(), b.random_drugs.len()), (7, 2, 1));
    }
    assert!(matches!(
        generate_batches(&non_drug, &[], &pts, 10, 1, 0),
        Err(PretrainError::InsufficientDrugMolecules { .. })
    ));
}

#[test]
fn batch_invariants_over_fifty_seeds() {
    for seed in 0..50u64 {
        assert_batch_invariants(seed);
    }
}

// ---- loss -------------------------------------------------------------------

#[test]
fn all_equal_projections_give_log_n_plus_m_minus_two() {
    let mut t = Tape::new();
    let z = vec![vec![0.3, -1.0, 2.0]; 4];
    let v = views(&mut t, &[((0..4).collect(), z.clone()), ((0..4).collect(), z)]);
    let (l, _) = anchor_losses(&mut t, &v[0], &v[1], 0.1).unwrap();
    for &x in &t.value(l).data {
        assert!((x - 6f64.ln()).abs() <= 1e-12, "{x}");
    }
}

#[test]
fn two_by_two_orthogonal_negatives() {
    let mut t = Tape::new();
    let v = views(
        &mut t,
        &[(vec![0, 1], vec![vec![1.0, 0.0], vec![0.0, 1.0]]), (vec![0, 1], vec![vec![1.0, 0.0], vec![0.0, 1.0]])],
    );
    let l = pair_loss(&mut t, &v[0], &v[1], 0, 1.0).unwrap();
    assert!((t.value(l).item() - (2f64.ln() - 1.0)).abs() <= 1e-15);
}

#[test]
fn single_pair_has_no_negatives() {
    let mut t = Tape::new();
    let v = views(&mut t, &[(vec![0], vec![vec![1.0, 2.0]]), (vec![0], vec![vec![1.0, 2.0]])]);
    assert!(matches!(anchor_losses(&mut t, &v[0], &v[1], 0.1), Err(PretrainError::NoNegatives)));
}

#[test]
fn losses_match_high_precision_reference() {
    let mut t = Tape::new();
    let v = frozen_views(&mut t);
    let check = |t: &mut Tape, a: usize, b: usize, expect: &[f64]| {
        let (l, _) = anchor_losses(t, &v[a], &v[b], 0.1).unwrap();
        for (x, e) in t.value(l).data.iter().zip(expect) {
            assert!(rel(*x, *e) <= 1e-10, "{x} vs {e}");
        }
    };
    check(&mut t, 0, 1, &M_EM_ANCHORS);
    check(&mut t, 0, 2, &M_DM_ANCHORS);
    check(&mut t, 2, 0, &DM_M_ANCHORS);
    for (k, (a, b)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
        let l = view_pair_loss(&mut t, &v[a], &v[b], 0.1).unwrap();
        assert!(rel(t.value(l).item(), VIEW_PAIRS[k]) <= 1e-10);
    }
    let parts = total_loss(&mut t, &v[0], &v[1], &v[2], 0.1).unwrap();
    assert!(rel(t.value(parts.total).item(), TOTAL) <= 1e-10);
    let parts = total_loss(&mut t, &v[0], &v[1], &v[2], 0.5).unwrap();
    assert!(rel(t.value(parts.total).item(), TOTAL_TAU_HALF) <= 1e-10);
}

/// Straight loop over anchors and negatives.
fn loop_loss(a: &(Vec<usize>, Vec<Vec<f64>>), b: &(Vec<usize>, Vec<Vec<f64>>), item: usize, tau: f64) -> f64 {
    let cos = |x: &[f64], y: &[f64]| {
        let d: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        d / (x.iter().map(|p| p * p).sum::<f64>().sqrt() * y.iter().map(|q| q * q).sum::<f64>().sqrt())
    };
    let ra = a.0.iter().position(|&i| i == item).unwrap();
    let rb = b.0.iter().position(|&i| i == item).unwrap();
    let mut den = 0.0;
    for j in 0..a.0.len() {
        if j != ra {
            den += (cos(&a.1[ra], &a.1[j]) / tau).exp();
        }
    }
    for j in 0..b.0.len() {
        if b.0[j] != item {
            den += (cos(&a.1[ra], &b.1[j]) / tau).exp();
        }
    }
    den.ln() - cos(&a.1[ra], &b.1[rb]) / tau
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn anchor_losses_equal_loop_evaluation(seed in 0u64..10_000, n in 2usize..8, tau in 0.05f64..1.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let dz = 4;
        let mut pick = |rows: usize| -> Vec<Vec<f64>> { (0..rows).map(|_| (0..dz).map(|_| r.random_range(-1.0..1.0)).collect()).collect() };
        let a = ((0..n).collect::<Vec<_>>(), pick(n));
        let drugs: Vec<usize> = (0..n).filter(|i| i % 2 == 1).collect();
        let b = if drugs.len() >= 1 && n > 2 { (drugs.clone(), pick(drugs.len())) } else { ((0..n).collect(), pick(n)) };
        let mut t = Tape::new();
        let v = views(&mut t, &[a.clone(), b.clone()]);
        for (x, y, vx, vy) in [(&a, &b, &v[0], &v[1]), (&b, &a, &v[1], &v[0])] {
            let (l, items) = anchor_losses(&mut t, vx, vy, tau).unwrap();
            for (k, &item) in items.iter().enumerate() {
                let expect = loop_loss(x, y, item, tau);
                prop_assert!((t.value(l).data[k] - expect).abs() <= 1e-10 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn loss_ignores_scale_and_rotation(seed in 0u64..10_000, s in 0.01f64..50.0, theta in 0.0f64..6.28) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<Vec<Vec<f64>>> = (0..3).map(|k| (0..[5, 5, 2][k]).map(|_| (0..2).map(|_| r.random_range(-1.0..1.0)).collect()).collect()).collect();
        let items = [vec![0, 1, 2, 3, 4], vec![0, 1, 2, 3, 4], vec![1, 3]];
        let total = |f: &dyn Fn(&[f64]) -> Vec<f64>| {
            let mut t = Tape::new();
            let rows: Vec<(Vec<usize>, Vec<Vec<f64>>)> =
                (0..3).map(|k| (items[k].clone(), z[k].iter().map(|p| f(p)).collect())).collect();
            let v = views(&mut t, &rows);
            let parts = total_loss(&mut t, &v[0], &v[1], &v[2], 0.2).unwrap();
            t.value(parts.total).item()
        };
        let base = total(&|p| p.to_vec());
        let scaled = total(&|p| p.iter().map(|x| x * s).collect());
        let (c, sn) = (theta.cos(), theta.sin());
        let rotated = total(&|p| vec![c * p[0] - sn * p[1], sn * p[0] + c * p[1]]);
        prop_assert!((base - scaled).abs() <= 1e-10 * base.abs().max(1.0));
        prop_assert!((base - rotated).abs() <= 1e-10 * base.abs().max(1.0));
    }
}

#[test]
fn symmetric_views_give_equal_directions() {
    let mut t = Tape::new();
    let z = random_points(4, 5, 3);
    let v = views(&mut t, &[((0..5).collect(), z.clone()), ((0..5).collect(), z)]);
    let (ab, _) = anchor_losses(&mut t, &v[0], &v[1], 0.1).unwrap();
    let (ba, _) = anchor_losses(&mut t, &v[1], &v[0], 0.1).unwrap();
    assert_eq!(t.value(ab), t.value(ba));
}

#[test]
fn ten_item_batch_with_three_drugs_closed_form() {
    let mut t = Tape::new();
    let z = vec![vec![1.0, 1.0]; 10];
    let v = views(&mut t, &[((0..10).collect(), z.clone()), ((0..10).collect(), z.clone()), (vec![7, 8, 9], z[..3].to_vec())]);
    let parts = total_loss(&mut t, &v[0], &v[1], &v[2], 0.1).unwrap();
    let expect = 2.0 * 18f64.ln() + 4.0 * 11f64.ln();
    assert!((t.value(parts.total).item() - expect).abs() <= 1e-12);
    let empty = ViewProjections { items: vec![], z: v[2].z };
    assert!(matches!(total_loss(&mut t, &v[0], &v[1], &empty, 0.1), Err(PretrainError::InsufficientDrugMolecules { .. })));
}

#[test]
fn projector_matches_direct_evaluation() {
    let p = Projector { d: 4, dz: 3, slope: 0.01 };
    let mut store = ParamStore::new();
    p.init_params(&mut store, 6);
    let h = random_points(8, 2, 4);
    let mut t = Tape::new();
    let hv = t.constant(Tensor::from_rows(&h).unwrap()).unwrap();
    let z = p.forward(&mut t, &store, hv).unwrap();
    let m = |n: &str| store.by_name(n).unwrap().value.to_rows();
    let (w1, b1, w2, b2) = (m(Projector::W1), m(Projector::B1), m(Projector::W2), m(Projector::B2));
    for (r, hr) in h.iter().enumerate() {
        let x: Vec<f64> = (0..4)
            .map(|j| {
                let s = b1[0][j] + (0..4).map(|i| hr[i] * w1[i][j]).sum::<f64>();
                if s > 0.0 { s } else { 0.01 * s }
            })
            .collect();
        for k in 0..3 {
            let expect = b2[0][k] + (0..4).map(|j| x[j] * w2[j][k]).sum::<f64>();
            assert!((t.value(z).get(r, k) - expect).abs() <= 1e-12);
        }
    }
}

#[test]
fn zero_projector_outputs_bias() {
    let p = Projector { d: 3, dz: 2, slope: 0.01 };
    let mut store = ParamStore::new();
    p.init_params(&mut store, 1);
    for name in [Projector::W1, Projector::W2] {
        let id = store.id(name).unwrap();
        store.get_mut(id).value.data.iter_mut().for_each(|x| *x = 0.0);
    }
    let mut t = Tape::new();
    let h = t.constant(Tensor::filled(2, 3, 0.7)).unwrap();
    let z = p.forward(&mut t, &store, h).unwrap();
    let b2 = store.by_name(Projector::B2).unwrap().value.data.clone();
    assert_eq!(t.value(z).row(1), &b2[..]);
    let _ = Encoder::new(EncoderConfig::default(), TypeDims::standard(1)).unwrap();
}
