use std::rc::Rc;

use super::PretrainError;
use crate::autodiff::{ParamStore, Tape, Tensor, Var};

/// Projections of one view; row `r` belongs to batch item `items[r]`.
#[derive(Debug, Clone)]
pub struct ViewProjections {
    pub items: Vec<usize>,
    pub z: Var,
}

/// Per-anchor contrastive losses `L(A, B, i)` for every item present in
/// both views, in A's row order. The denominator holds the intra-view
/// negatives of A and the inter-view negatives of B; the positive pair is
/// not part of it, so a single anchor's loss may be negative.
pub fn anchor_losses(
    tape: &mut Tape,
    a: &ViewProjections,
    b: &ViewProjections,
    tau: f64,
) -> Result<(Var, Vec<usize>), PretrainError> {
    let (na, nb) = (a.items.len(), b.items.len());
    let mut rows = Vec::new();
    let mut pos_cols = Vec::new();
    for (ra, item) in a.items.iter().enumerate() {
        if let Some(rb) = b.items.iter().position(|x| x == item) {
            rows.push(ra);
            pos_cols.push(na + rb);
        }
    }
    if rows.is_empty() {
        return Err(PretrainError::NoPositives);
    }
    let width = na + nb;
    let mut mask = Tensor::zeros(rows.len(), width);
    let mut select = Tensor::zeros(rows.len(), width);
    for (p, &ra) in rows.iter().enumerate() {
        let mut negatives = 0;
        for j in 0..na {
            if j != ra {
                mask.set(p, j, 1.0);
                negatives += 1;
            }
        }
        for (c, item) in b.items.iter().enumerate() {
            if *item != a.items[ra] {
                mask.set(p, na + c, 1.0);
                negatives += 1;
            }
        }
        if negatives == 0 {
            return Err(PretrainError::NoNegatives);
        }
        select.set(p, pos_cols[p], 1.0);
    }
    let saa = tape.cosine(a.z, a.z)?;
    let sab = tape.cosine(a.z, b.z)?;
    let sims = tape.concat_cols(&[saa, sab])?;
    let sims = tape.gather_rows(sims, Rc::new(rows.clone()))?;
    let logits = tape.scale(sims, 1.0 / tau)?;
    let e = tape.exp(logits)?;
    let mask = tape.constant(mask)?;
    let masked = tape.mul(e, mask)?;
    let denom = tape.sum_cols(masked)?;
    let log_denom = tape.log(denom)?;
    let select = tape.constant(select)?;
    let picked = tape.mul(logits, select)?;
    let pos = tape.sum_cols(picked)?;
    let loss = tape.sub(log_denom, pos)?;
    Ok((loss, rows.into_iter().map(|r| a.items[r]).collect()))
}

/// `L(A, B, item)` as a `1 x 1` value.
pub fn pair_loss(
    tape: &mut Tape,
    a: &ViewProjections,
    b: &ViewProjections,
    item: usize,
    tau: f64,
) -> Result<Var, PretrainError> {
    let (all, items) = anchor_losses(tape, a, b, tau)?;
    let row = items.iter().position(|&x| x == item).ok_or(PretrainError::NoPositives)?;
    Ok(tape.gather_rows(all, Rc::new(vec![row]))?)
}

/// Mean of `L(A, B, i)` plus mean of `L(B, A, i)` over shared items.
pub fn view_pair_loss(tape: &mut Tape, a: &ViewProjections, b: &ViewProjections, tau: f64) -> Result<Var, PretrainError> {
    let (ab, _) = anchor_losses(tape, a, b, tau)?;
    let (ba, _) = anchor_losses(tape, b, a, tau)?;
    let ab = tape.mean_rows(ab)?;
    let ba = tape.mean_rows(ba)?;
    Ok(tape.add(ab, ba)?)
}

#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub total: Var,
    pub m_em: Var,
    pub m_dm: Var,
    pub em_dm: Var,
}

pub fn total_loss(
    tape: &mut Tape,
    m: &ViewProjections,
    em: &ViewProjections,
    dm: &ViewProjections,
    tau: f64,
) -> Result<LossParts, PretrainError> {
    if dm.items.is_empty() {
        return Err(PretrainError::InsufficientDrugMolecules { needed: 1, available: 0 });
    }
    let m_em = view_pair_loss(tape, m, em, tau)?;
    let m_dm = view_pair_loss(tape, m, dm, tau)?;
    let em_dm = view_pair_loss(tape, em, dm, tau)?;
    let s = tape.add(m_em, m_dm)?;
    let total = tape.add(s, em_dm)?;
    Ok(LossParts { total, m_em, m_dm, em_dm })
}

/// Two-layer head `d -> d -> d_z` with LeakyReLU in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub d: usize,
    pub dz: usize,
    pub slope: f64,
}

impl Projector {
    pub const W1: &'static str = "proj.W1";
    pub const B1: &'static str = "proj.b1";
    pub const W2: &'static str = "proj.W2";
    pub const B2: &'static str = "proj.b2";

    pub fn init_params(&self, store: &mut ParamStore, seed: u64) {
        let bound = 1.0 / (self.d as f64).sqrt();
        store.insert_uniform(Self::W1, "projector", self.d, self.d, bound, seed);
        store.insert_uniform(Self::B1, "projector", 1, self.d, bound, seed);
        store.insert_uniform(Self::W2, "projector", self.d, self.dz, bound, seed);
        store.insert_uniform(Self::B2, "projector", 1, self.dz, bound, seed);
    }

    /// Rows of `h` are graph embeddings.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, h: Var) -> Result<Var, PretrainError> {
        let w1 = tape.param_named(store, Self::W1);
        let b1 = tape.param_named(store, Self::B1);
        let w2 = tape.param_named(store, Self::W2);
        let b2 = tape.param_named(store, Self::B2);
        let x = tape.linear(h, w1, b1)?;
        let x = tape.leaky_relu(x, self.slope)?;
        Ok(tape.linear(x, w2, b2)?)
    }
}
