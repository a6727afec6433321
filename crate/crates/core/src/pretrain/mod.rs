//! Cluster-balanced batch generation and cross-view contrastive pretraining.

mod batch;
mod loss;

pub use batch::{
    batch_split, constrained_kmeans, fingerprint, generate_batches, nearest_neighbors, plan_batches, squared_distance,
    BatchPlan, Clustering, MiniBatch, FINGERPRINT_BITS, FINGERPRINT_PATH_LEN,
};
pub use loss::{anchor_losses, pair_loss, total_loss, view_pair_loss, LossParts, Projector, ViewProjections};

use std::fmt::Write as _;

use thiserror::Error;

use crate::autodiff::{Adam, AutodiffError, Gradients, ParamStore, Tape, Var};
use crate::chem::MolecularGraph;
use crate::encoder::{Encoder, EncoderConfig, EncoderError, GraphInputs};
use crate::hmg::{HmgError, ViewBuilder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PretrainError {
    #[error("no points to cluster")]
    EmptyInput,
    #[error("asked for {needed} neighbours among {available} candidates")]
    InsufficientCandidates { needed: usize, available: usize },
    #[error("batch generation needs {needed} drug molecules, found {available}")]
    InsufficientDrugMolecules { needed: usize, available: usize },
    #[error("anchor has no negatives")]
    NoNegatives,
    #[error("views share no items")]
    NoPositives,
    #[error("pretrain config: {0}")]
    Config(String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Hmg(#[from] HmgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub encoder: EncoderConfig,
    /// Batch size N.
    pub batch_size: usize,
    /// Drugs per batch drawn at random from those not used as neighbours.
    pub n_random: usize,
    pub tau: f64,
    pub dz: usize,
    pub epochs: usize,
    /// Stop after this many optimizer steps, whatever the epoch.
    pub max_steps: Option<usize>,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            encoder: EncoderConfig::default(),
            batch_size: 70,
            n_random: 1,
            tau: 0.1,
            dz: 32,
            epochs: 10,
            max_steps: None,
            step_size: 1e-3,
            seed: 0,
        }
    }
}

/// One molecule with its encoder inputs; `dm` is present only for drugs
/// found in the embedding table.
#[derive(Debug, Clone)]
pub struct PretrainItem {
    pub id: String,
    pub m: GraphInputs,
    pub em: GraphInputs,
    pub dm: Option<GraphInputs>,
    pub fingerprint: Vec<f64>,
}

impl PretrainItem {
    pub fn new(
        id: &str,
        mol: &MolecularGraph,
        drug_id: Option<&str>,
        builder: &ViewBuilder,
        encoder: &Encoder,
    ) -> Result<Self, PretrainError> {
        let views = builder.build(mol, drug_id)?;
        Ok(PretrainItem {
            id: id.to_string(),
            m: GraphInputs::new(&views.m, encoder)?,
            em: GraphInputs::new(&views.em, encoder)?,
            dm: views.dm.as_ref().map(|g| GraphInputs::new(g, encoder)).transpose()?,
            fingerprint: fingerprint(mol),
        })
    }

    pub fn is_drug(&self) -> bool {
        self.dm.is_some()
    }
}

/// Encoder plus projection head sharing one parameter store.
#[derive(Debug, Clone)]
pub struct ContrastiveModel {
    pub encoder: Encoder,
    pub projector: Projector,
    pub params: ParamStore,
}

impl ContrastiveModel {
    pub fn new(encoder: Encoder, dz: usize) -> Self {
        let projector = Projector { d: encoder.config.d, dz, slope: encoder.config.leaky_slope };
        let mut params = ParamStore::new();
        encoder.init_params(&mut params);
        projector.init_params(&mut params, encoder.config.seed);
        ContrastiveModel { encoder, projector, params }
    }

    /// Projections of the given graphs, one row each.
    pub fn project(&self, tape: &mut Tape, store: &ParamStore, graphs: &[&GraphInputs]) -> Result<Var, PretrainError> {
        let mut rows = Vec::with_capacity(graphs.len());
        for g in graphs {
            rows.push(self.encoder.forward(tape, store, g)?.graph);
        }
        let h = tape.concat_rows(&rows)?;
        self.projector.forward(tape, store, h)
    }

    /// Projections of every view of `batch` (indexed by position in it) and the loss.
    pub fn batch_loss(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        items: &[&PretrainItem],
        tau: f64,
    ) -> Result<LossParts, PretrainError> {
        let all: Vec<usize> = (0..items.len()).collect();
        let drugs: Vec<usize> = all.iter().copied().filter(|&i| items[i].is_drug()).collect();
        let m: Vec<&GraphInputs> = items.iter().map(|it| &it.m).collect();
        let em: Vec<&GraphInputs> = items.iter().map(|it| &it.em).collect();
        let dm: Vec<&GraphInputs> = drugs.iter().map(|&i| items[i].dm.as_ref().expect("drug item")).collect();
        if dm.is_empty() {
            return Err(PretrainError::InsufficientDrugMolecules { needed: 1, available: 0 });
        }
        let zm = ViewProjections { items: all.clone(), z: self.project(tape, store, &m)? };
        let zem = ViewProjections { items: all, z: self.project(tape, store, &em)? };
        let zdm = ViewProjections { items: drugs, z: self.project(tape, store, &dm)? };
        total_loss(tape, &zm, &zem, &zdm, tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub total: f64,
    pub m_em: f64,
    pub m_dm: f64,
    pub em_dm: f64,
}

pub const TRACE_HEADER: &str = "step,loss_total,loss_M_EM,loss_M_DM,loss_EM_DM";

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        let _ = writeln!(out, "{},{},{},{},{}", r.step, r.total, r.m_em, r.m_dm, r.em_dm);
    }
    out
}

/// Clustering and nearest-drug fill for `items`, fixed for a whole run.
pub fn plan_for(items: &[PretrainItem], cfg: &PretrainConfig) -> Result<BatchPlan, PretrainError> {
    let points: Vec<Vec<f64>> = items.iter().map(|it| it.fingerprint.clone()).collect();
    let non_drug: Vec<usize> = (0..items.len()).filter(|&i| !items[i].is_drug()).collect();
    let drug: Vec<usize> = (0..items.len()).filter(|&i| items[i].is_drug()).collect();
    plan_batches(&non_drug, &drug, &points, cfg.batch_size, cfg.n_random, cfg.seed)
}

/// Mean total loss over `batches` without updating anything.
pub fn evaluate_loss(model: &ContrastiveModel, items: &[PretrainItem], batches: &[MiniBatch], tau: f64) -> Result<f64, PretrainError> {
    let mut sum = 0.0;
    for b in batches {
        let members: Vec<&PretrainItem> = b.items.iter().map(|&i| &items[i]).collect();
        let mut tape = Tape::new();
        let parts = model.batch_loss(&mut tape, &model.params, &members, tau)?;
        sum += tape.value(parts.total).item();
    }
    Ok(sum / batches.len().max(1) as f64)
}

/// Adam over the planned batches, with the random drug fill redrawn every
/// epoch; one optimizer step per batch.
pub fn pretrain(
    model: &mut ContrastiveModel,
    items: &[PretrainItem],
    cfg: &PretrainConfig,
) -> Result<Vec<TraceRow>, PretrainError> {
    let mut adam = Adam::new(&model.params, cfg.step_size);
    let mut grads = Gradients::zeros_like(&model.params);
    let mut trace = Vec::new();
    let limit = cfg.max_steps.unwrap_or(usize::MAX);
    let plan = plan_for(items, cfg)?;
    'epochs: for epoch in 0..cfg.epochs {
        for batch in plan.draw(epoch as u64) {
            if trace.len() >= limit {
                break 'epochs;
            }
            let members: Vec<&PretrainItem> = batch.items.iter().map(|&i| &items[i]).collect();
            let mut tape = Tape::new();
            let parts = model.batch_loss(&mut tape, &model.params, &members, cfg.tau)?;
            grads.zero();
            tape.backward_into(parts.total, &mut grads)?;
            adam.step(&mut model.params, &grads)?;
            let v = |x: Var| tape.value(x).item();
            trace.push(TraceRow {
                step: trace.len(),
                total: v(parts.total),
                m_em: v(parts.m_em),
                m_dm: v(parts.m_dm),
                em_dm: v(parts.em_dm),
            });
            log::debug!("pretrain step {} loss {:.6}", trace.len() - 1, v(parts.total));
        }
    }
    Ok(trace)
}

/// Mean cosine of same-molecule cross-view pairs and of different-molecule
/// cross-view pairs, over every pair of views.
pub fn cosine_separation(model: &ContrastiveModel, items: &[PretrainItem]) -> Result<(f64, f64), PretrainError> {
    let mut tape = Tape::new();
    let p = &model.params;
    let m = model.project(&mut tape, p, &items.iter().map(|i| &i.m).collect::<Vec<_>>())?;
    let em = model.project(&mut tape, p, &items.iter().map(|i| &i.em).collect::<Vec<_>>())?;
    let drug_rows: Vec<usize> = (0..items.len()).filter(|&i| items[i].is_drug()).collect();
    let dm_graphs: Vec<&GraphInputs> = drug_rows.iter().map(|&i| items[i].dm.as_ref().expect("drug")).collect();
    let all: Vec<usize> = (0..items.len()).collect();
    let mut views = vec![(all.clone(), m), (all, em)];
    if !dm_graphs.is_empty() {
        views.push((drug_rows, model.project(&mut tape, p, &dm_graphs)?));
    }
    let (mut pos, mut np, mut neg, mut nn) = (0.0, 0usize, 0.0, 0usize);
    for a in 0..views.len() {
        for b in a + 1..views.len() {
            let c = tape.cosine(views[a].1, views[b].1)?;
            let c = tape.value(c);
            for (ra, ia) in views[a].0.iter().enumerate() {
                for (rb, ib) in views[b].0.iter().enumerate() {
                    if ia == ib {
                        pos += c.get(ra, rb);
                        np += 1;
                    } else {
                        neg += c.get(ra, rb);
                        nn += 1;
                    }
                }
            }
        }
    }
    Ok((pos / np.max(1) as f64, neg / nn.max(1) as f64))
}
