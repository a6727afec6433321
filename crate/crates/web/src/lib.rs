//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export takes plain strings and numbers and returns JSON text. The
//! native functions underneath are usable (and tested) without a browser.

use hetmol::autodiff::Tape;
use hetmol::chem::{brics_fragment, default_rules, parse_smiles, ChemError, MolecularGraph};
use hetmol::encoder::{Encoder, EncoderConfig, EncoderError, GraphInputs};
use hetmol::hmg::{EdgeType, ElementKnowledge, Hmg, HmgError, NodeType, View, ViewBuilder};
use hetmol::kg::default_elemental_kg;
use hetmol::pretrain::{anchor_losses, view_pair_loss, ContrastiveModel, PretrainError, ViewProjections};
use serde::Serialize;
use thiserror::Error;
use wasm_bindgen::prelude::*;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("line {line}: {source}")]
    Smiles { line: usize, source: ChemError },
    #[error(transparent)]
    Hmg(#[from] HmgError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Pretrain(#[from] PretrainError),
    #[error("unknown view `{0}`; use M or EM")]
    View(String),
    #[error("need at least two molecules, got {0}")]
    TooFewMolecules(usize),
}

fn builder() -> ViewBuilder {
    ViewBuilder {
        rules: default_rules(),
        element: ElementKnowledge::new(default_elemental_kg()).expect("built-in graph is valid"),
        drug_embeddings: None,
        k_pe: 8,
    }
}

fn encoder(builder: &ViewBuilder, seed: u64) -> Encoder {
    let cfg = EncoderConfig { d: 16, layers: 2, heads: 2, seed, ..Default::default() };
    Encoder::new(cfg, builder.type_dims()).expect("fixed configuration is valid")
}

fn parse(smiles: &str, line: usize) -> Result<MolecularGraph, DemoError> {
    parse_smiles(smiles.trim()).map_err(|source| DemoError::Smiles { line, source })
}

fn molecules(text: &str) -> Result<Vec<MolecularGraph>, DemoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse(l, i + 1))
        .collect()
}

#[derive(Debug, Serialize)]
pub struct ViewSummary {
    pub view: String,
    pub nodes: Vec<(String, String)>,
    pub node_counts: Vec<(String, usize)>,
    pub edge_counts: Vec<(String, usize)>,
}

impl ViewSummary {
    fn of(g: &Hmg) -> Self {
        ViewSummary {
            view: g.view.name().into(),
            nodes: g.nodes.iter().map(|n| (n.kind.name().to_string(), n.label.clone())).collect(),
            node_counts: NodeType::ALL.iter().map(|&t| (t.name().into(), g.count_nodes(t))).filter(|c| c.1 > 0).collect(),
            edge_counts: EdgeType::ALL.iter().map(|&t| (t.name().into(), g.count_edges(t))).filter(|c| c.1 > 0).collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Views {
    pub atoms: usize,
    pub bonds: usize,
    pub fragments: Vec<Vec<usize>>,
    pub views: Vec<ViewSummary>,
}

/// Fragments plus the molecule and element views of one SMILES string.
pub fn views(smiles: &str) -> Result<Views, DemoError> {
    let mol = parse(smiles, 1)?;
    let b = builder();
    let v = b.build(&mol, None)?;
    Ok(Views {
        atoms: mol.atoms.len(),
        bonds: mol.bonds.len(),
        fragments: brics_fragment(&mol, &b.rules).fragments,
        views: vec![ViewSummary::of(&v.m), ViewSummary::of(&v.em)],
    })
}

#[derive(Debug, Serialize)]
pub struct NodeScore {
    pub node_id: usize,
    pub node_type: String,
    pub label: String,
    pub score: f64,
    pub normalized: f64,
}

/// Readout scores of every node under a freshly initialised encoder,
/// normalised within each node type.
pub fn attention(smiles: &str, view: &str, seed: u64) -> Result<Vec<NodeScore>, DemoError> {
    let mol = parse(smiles, 1)?;
    let b = builder();
    let v = b.build(&mol, None)?;
    let g = match view.parse::<View>() {
        Ok(View::M) => v.m,
        Ok(View::EM) => v.em,
        _ => return Err(DemoError::View(view.into())),
    };
    let enc = encoder(&b, seed);
    let mut store = Default::default();
    enc.init_params(&mut store);
    let (_, dump) = enc.encode_with_dump(&store, &g)?;
    Ok(dump
        .pool
        .into_iter()
        .map(|p| NodeScore {
            node_id: p.node_id,
            node_type: p.node_type,
            label: p.label,
            score: p.pool_score,
            normalized: p.pool_score_normalized_by_type,
        })
        .collect())
}

#[derive(Debug, Serialize)]
pub struct PairLosses {
    /// Loss of each molecule's M-view anchor against the EM view.
    pub anchors: Vec<f64>,
    /// Mean over both directions.
    pub view_pair: f64,
    /// Cosine similarity between every M row and every EM row.
    pub cosine: Vec<Vec<f64>>,
}

/// Contrastive loss between the M and EM views of a batch, one SMILES per
/// line, under a freshly initialised encoder and projector.
pub fn pair_losses(batch: &str, tau: f64, seed: u64) -> Result<PairLosses, DemoError> {
    let mols = molecules(batch)?;
    if mols.len() < 2 {
        return Err(DemoError::TooFewMolecules(mols.len()));
    }
    let b = builder();
    let model = ContrastiveModel::new(encoder(&b, seed), 16);
    let (mut m, mut em) = (Vec::new(), Vec::new());
    for mol in &mols {
        let v = b.build(mol, None)?;
        m.push(GraphInputs::new(&v.m, &model.encoder)?);
        em.push(GraphInputs::new(&v.em, &model.encoder)?);
    }
    let mut tape = Tape::new();
    let items: Vec<usize> = (0..mols.len()).collect();
    let zm = model.project(&mut tape, &model.params, &m.iter().collect::<Vec<_>>())?;
    let zem = model.project(&mut tape, &model.params, &em.iter().collect::<Vec<_>>())?;
    let a = ViewProjections { items: items.clone(), z: zm };
    let e = ViewProjections { items, z: zem };
    let (anchors, _) = anchor_losses(&mut tape, &a, &e, tau)?;
    let pair = view_pair_loss(&mut tape, &a, &e, tau)?;
    let cos = tape.cosine(zm, zem).map_err(PretrainError::from)?;
    Ok(PairLosses {
        anchors: tape.value(anchors).data.clone(),
        view_pair: tape.value(pair).item(),
        cosine: tape.value(cos).to_rows(),
    })
}

fn json<T: Serialize>(r: Result<T, DemoError>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = buildViews)]
pub fn build_views(smiles: &str) -> Result<String, JsError> {
    json(views(smiles))
}

#[wasm_bindgen(js_name = attentionScores)]
pub fn attention_scores(smiles: &str, view: &str, seed: u32) -> Result<String, JsError> {
    json(attention(smiles, view, seed as u64))
}

#[wasm_bindgen(js_name = pairLoss)]
pub fn pair_loss(batch: &str, tau: f64, seed: u32) -> Result<String, JsError> {
    json(pair_losses(batch, tau, seed as u64))
}
