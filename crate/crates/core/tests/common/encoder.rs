//! Encoder fixtures: small configurations, the view builder over the
//! golden corpus and random typed graphs.

use hetmol::autodiff::ParamStore;
use hetmol::chem::{default_rules, parse_smiles};
use hetmol::encoder::{Encoder, EncoderConfig};
use hetmol::hmg::{Edge, EdgeType, ElementKnowledge, Hmg, Node, NodeType, TypeDims, View, ViewBuilder};
use hetmol::kg::{default_elemental_kg, EmbeddingTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::chem::golden;

/// `n` nodes of random type and `pairs` random edges, each stored with its reverse.
pub fn random_graph(seed: u64, dims: &TypeDims, n: usize, pairs: usize) -> Hmg {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Hmg::new(View::EM);
    for _ in 0..n {
        let kind = NodeType::ALL[r.random_range(0..4)];
        let features = (0..dims.node[kind.index()]).map(|_| r.random_range(-1.0..1.0)).collect();
        let pe = (0..8).map(|_| r.random_range(-0.5..0.5)).collect();
        g.nodes.push(Node { kind, features, pe, label: "x".into() });
    }
    for _ in 0..pairs {
        let a = r.random_range(0..n);
        let b = (a + r.random_range(1..n)) % n;
        let kind = EdgeType::ALL[r.random_range(0..EdgeType::COUNT)];
        let w = dims.edge[kind.index()];
        let i = g.edges.len();
        for (s, t, rev) in [(a, b, i + 1), (b, a, i)] {
            let features = (0..w).map(|_| r.random_range(-1.0..1.0)).collect();
            g.edges.push(Edge { source: s, target: t, kind, features, reverse: rev });
        }
    }
    g
}

pub fn builder() -> ViewBuilder {
    ViewBuilder {
        rules: default_rules(),
        element: ElementKnowledge::new(default_elemental_kg()).unwrap(),
        drug_embeddings: Some(EmbeddingTable::new(vec!["DB1".into()], vec![vec![0.25; 16]]).unwrap()),
        k_pe: 8,
    }
}

pub fn small_config(seed: u64, layers: usize) -> EncoderConfig {
    EncoderConfig { d: 8, layers, heads: 2, k_pe: 8, leaky_slope: 0.01, pool_ratio: 0.5, seed }
}

pub fn model(cfg: EncoderConfig, dims: TypeDims) -> (Encoder, ParamStore) {
    let enc = Encoder::new(cfg, dims).unwrap();
    let mut store = ParamStore::new();
    enc.init_params(&mut store);
    (enc, store)
}

/// M, EM and DM views of every golden molecule.
pub fn corpus_views() -> Vec<Hmg> {
    let b = builder();
    golden()
        .iter()
        .flat_map(|s| {
            let mol = parse_smiles(&s.smiles).unwrap();
            let v = b.build(&mol, Some("DB1")).unwrap();
            [v.m, v.em, v.dm.unwrap()]
        })
        .collect()
}
