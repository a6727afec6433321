use std::collections::BTreeMap;

use hetmol::chem::{default_rules, parse_smiles, MolecularGraph};
use hetmol::hmg::{laplacian_pe_graph, EdgeType, ElementKnowledge, Hmg, NodeType, ViewBuilder};
use hetmol::kg::{default_elemental_kg, EmbeddingTable};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: &str = include_str!("data/golden_smiles.tsv");

fn golden_smiles() -> Vec<&'static str> {
    GOLDEN.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).map(|l| l.split('\t').next().unwrap()).collect()
}

fn builder() -> ViewBuilder {
    ViewBuilder {
        rules: default_rules(),
        element: ElementKnowledge::new(default_elemental_kg()).unwrap(),
        drug_embeddings: Some(EmbeddingTable::new(vec!["DB1".into()], vec![vec![0.25; 16]]).unwrap()),
        k_pe: 8,
    }
}

/// Cyclic Jacobi rotations on a dense symmetric matrix.
fn jacobi(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

fn oracle_pe(n: usize, edges: &[(usize, usize)], k: usize) -> Option<Vec<Vec<f64>>> {
    let mut adj = vec![vec![0.0; n]; n];
    for &(a, b) in edges {
        adj[a][b] = 1.0;
        adj[b][a] = 1.0;
    }
    let deg: Vec<f64> = adj.iter().map(|r| r.iter().sum()).collect();
    let lap: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (i == j) as u8 as f64 - adj[i][j] / (deg[i] * deg[j]).sqrt()).collect())
        .collect();
    let (vals, vecs) = jacobi(lap);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    // eigenvectors are only determined for simple eigenvalues
    for w in order.windows(2).take(k + 1) {
        if (vals[w[1]] - vals[w[0]]).abs() < 1e-6 {
            return None;
        }
    }
    let mut out = vec![vec![0.0; k]; n];
    for (slot, &c) in order.iter().skip(1).take(k).enumerate() {
        let col: Vec<f64> = (0..n).map(|i| vecs[i][c]).collect();
        let max = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let lead = col.iter().position(|x| x.abs() >= max - 1e-9).unwrap();
        if col.iter().filter(|x| (x.abs() - max).abs() < 1e-6).count() > 1 {
            return None;
        }
        let s = col[lead].signum();
        for i in 0..n {
            out[i][slot] = s * col[i];
        }
    }
    Some(out)
}

fn random_connected(seed: u64) -> (usize, Vec<(usize, usize)>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = r.random_range(3..12);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (r.random_range(0..i), i)).collect();
    for _ in 0..r.random_range(n..3 * n) {
        let (a, b) = (r.random_range(0..n), r.random_range(0..n));
        if a < b && !edges.contains(&(a, b)) {
            edges.push((a, b));
        }
    }
    (n, edges)
}

#[test]
fn pe_matches_jacobi_oracle() {
    let mut checked = 0;
    for seed in 0..400 {
        let (n, edges) = random_connected(seed);
        let Some(want) = oracle_pe(n, &edges, 4) else { continue };
        let got = laplacian_pe_graph(n, &edges, 4);
        for i in 0..n {
            for j in 0..4 {
                assert!((got[i][j] - want[i][j]).abs() < 1e-8, "seed {seed}");
            }
        }
        checked += 1;
    }
    assert!(checked > 50, "{checked}");
}

#[test]
fn pe_rows_follow_node_permutation() {
    let mut checked = 0;
    for seed in 0..400 {
        let (n, edges) = random_connected(seed);
        if oracle_pe(n, &edges, 4).is_none() {
            continue;
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed + 1000));
        let pedges: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let base = laplacian_pe_graph(n, &edges, 4);
        let moved = laplacian_pe_graph(n, &pedges, 4);
        for i in 0..n {
            for j in 0..4 {
                assert!((base[i][j] - moved[perm[i]][j]).abs() < 1e-8);
            }
        }
        checked += 1;
    }
    assert!(checked > 50);
}

fn type_profile(g: &Hmg) -> (BTreeMap<NodeType, usize>, BTreeMap<EdgeType, usize>) {
    let mut nodes = BTreeMap::new();
    let mut edges = BTreeMap::new();
    for n in &g.nodes {
        *nodes.entry(n.kind).or_insert(0) += 1;
    }
    for e in &g.edges {
        *edges.entry(e.kind).or_insert(0) += 1;
    }
    (nodes, edges)
}

#[test]
fn views_are_valid_nested_and_round_trip() {
    let b = builder();
    let dims = b.type_dims();
    for s in golden_smiles() {
        let mol = parse_smiles(s).unwrap();
        let v = b.build(&mol, Some("DB1")).unwrap();
        let dm = v.dm.as_ref().unwrap();
        for g in [&v.m, &v.em, dm] {
            g.validate(Some(&dims)).unwrap_or_else(|e| panic!("{s}: {e}"));
            let text = g.serialize();
            assert_eq!(Hmg::parse(&text).unwrap().serialize(), text);
            assert_eq!(&g.nodes[..v.m.node_count()], &v.m.nodes[..]);
            assert_eq!(&g.edges[..v.m.edge_count()], &v.m.edges[..]);
        }
        let scaffold = v.m.node_count();
        assert_eq!(dm.node_count(), scaffold + 1);
        assert_eq!(dm.edge_count(), v.m.edge_count() + 2 * scaffold);
    }
}

#[test]
fn toy_element_view_edges_equal_brute_force() {
    let kg = hetmol::kg::parse_triples("C\thasWeight\tWeight2\nO\thasWeight\tWeight2\nN\thasWeight\tWeight2\nC\tisInPeriod\tPeriod2\nO\tisInPeriod\tPeriod2\n").unwrap();
    let mol = parse_smiles("CCO").unwrap();
    let b = ViewBuilder { rules: default_rules(), element: ElementKnowledge::new(kg).unwrap(), drug_embeddings: None, k_pe: 4 };
    let em = b.build(&mol, None).unwrap().em;
    let labels: Vec<&str> = em.nodes.iter().filter(|n| n.kind == NodeType::Element).map(|n| n.label.as_str()).collect();
    assert_eq!(labels, vec!["C", "O"]);
    // C and O share Weight2 and Period2: two undirected EE edges; N is absent
    assert_eq!(em.count_edges(EdgeType::EE), 4);
    let c = em.nodes.iter().position(|n| n.label == "C" && n.kind == NodeType::Element).unwrap();
    let o = em.nodes.iter().position(|n| n.label == "O" && n.kind == NodeType::Element).unwrap();
    assert_eq!(em.edges.iter().filter(|e| e.kind == EdgeType::AE && e.target == c).count(), 2);
    assert_eq!(em.edges.iter().filter(|e| e.kind == EdgeType::AE && e.target == o).count(), 1);
}

fn relabel(mol: &MolecularGraph, seed: u64) -> MolecularGraph {
    let mut perm: Vec<usize> = (0..mol.atom_count()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    mol.relabeled(&perm)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn type_counts_ignore_atom_order(idx in 0usize..54, seed in 0u64..1000) {
        let smiles = golden_smiles();
        let mol = parse_smiles(smiles[idx % smiles.len()]).unwrap();
        let other = relabel(&mol, seed);
        let b = builder();
        let (x, y) = (b.build(&mol, Some("DB1")).unwrap(), b.build(&other, Some("DB1")).unwrap());
        prop_assert_eq!(type_profile(&x.m), type_profile(&y.m));
        prop_assert_eq!(type_profile(&x.em), type_profile(&y.em));
        prop_assert_eq!(type_profile(x.dm.as_ref().unwrap()), type_profile(y.dm.as_ref().unwrap()));
    }
}
