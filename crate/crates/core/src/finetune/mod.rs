//! Property and drug-pair prediction heads on the molecule-view encoder,
//! with cross-validated training and evaluation metrics.

mod ddi;
mod metrics;

pub use ddi::{make_ddi_splits, parse_pairs, DdiSplit, Pair, PairRecord, SplitMode, MIN_DRUGS};
pub use metrics::{
    accuracy, average_precision, f1_score, metrics, mse, rmse, roc_auc, MetricReport, TaskKind, THRESHOLD,
};

use std::collections::BTreeMap;
use std::rc::Rc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Adam, AutodiffError, Gradients, ParamStore, Tape, Tensor, Var};
use crate::encoder::{Encoder, EncoderError, GraphInputs};
use crate::hmg::HmgError;
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FinetuneError {
    #[error("ranking metrics need both classes")]
    DegenerateLabels,
    #[error("{labels} labels but {scores} scores")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("{found} distinct drugs, need at least {needed}")]
    InsufficientDrugs { found: usize, needed: usize },
    #[error("finetune config: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Hmg(#[from] HmgError),
}

/// Fully connected `input -> hidden -> output` with LeakyReLU in between.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpHead {
    pub prefix: String,
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub slope: f64,
}

impl MlpHead {
    fn name(&self, part: &str) -> String {
        format!("{}.{part}", self.prefix)
    }

    pub fn init_params(&self, store: &mut ParamStore, seed: u64) {
        let group = self.prefix.clone();
        let b1 = 1.0 / (self.input as f64).sqrt();
        let b2 = 1.0 / (self.hidden as f64).sqrt();
        store.insert_uniform(&self.name("W1"), &group, self.input, self.hidden, b1, seed);
        store.insert_uniform(&self.name("b1"), &group, 1, self.hidden, b1, seed);
        store.insert_uniform(&self.name("W2"), &group, self.hidden, self.output, b2, seed);
        store.insert_uniform(&self.name("b2"), &group, 1, self.output, b2, seed);
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, AutodiffError> {
        let w1 = tape.param_named(store, &self.name("W1"));
        let b1 = tape.param_named(store, &self.name("b1"));
        let w2 = tape.param_named(store, &self.name("W2"));
        let b2 = tape.param_named(store, &self.name("b2"));
        let h = tape.linear(x, w1, b1)?;
        let h = tape.leaky_relu(h, self.slope)?;
        tape.linear(h, w2, b2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub folds: usize,
    pub seed: u64,
    /// Step-size multiplier applied after `patience / 2` epochs without a
    /// validation improvement; 1 disables it.
    pub plateau_decay: f64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig { epochs: 100, patience: 10, batch_size: 32, step_size: 1e-3, folds: 5, seed: 0, plateau_decay: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// `folds` train/validation/test splits in 8:1:1 proportion. The shuffled
/// items are cut into `2 * folds` chunks; fold `f` tests on chunk `f` and
/// validates on chunk `f + folds`, so test folds are pairwise disjoint.
pub fn kfold_splits(n: usize, folds: usize, seed: u64) -> Result<Vec<Fold>, FinetuneError> {
    if folds == 0 || n < 2 * folds {
        return Err(FinetuneError::Config(format!("{n} items cannot form {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "finetune.kfold"));
    let chunks = 2 * folds;
    let chunk = |c: usize| order[c * n / chunks..(c + 1) * n / chunks].to_vec();
    Ok((0..folds)
        .map(|f| {
            let test = chunk(f);
            let val = chunk(f + folds);
            let train = (0..chunks).filter(|&c| c != f && c != f + folds).flat_map(chunk).collect();
            Fold { train, val, test }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub best_val: f64,
    pub epochs_run: usize,
    pub train_loss: Vec<f64>,
}

/// Mini-batch Adam with early stopping on a validation score (higher is
/// better); `params` ends at the best-scoring epoch.
pub fn fit<L, V>(
    params: &mut ParamStore,
    cfg: &FinetuneConfig,
    n_train: usize,
    mut loss: L,
    mut val_score: V,
) -> Result<TrainSummary, FinetuneError>
where
    L: FnMut(&mut Tape, &ParamStore, &[usize]) -> Result<Var, FinetuneError>,
    V: FnMut(&ParamStore) -> Result<f64, FinetuneError>,
{
    if cfg.batch_size == 0 {
        return Err(FinetuneError::Config("batch_size must be positive".into()));
    }
    let mut adam = Adam::new(params, cfg.step_size);
    let mut grads = Gradients::zeros_like(params);
    let mut best = (f64::NEG_INFINITY, 0usize, params.clone());
    let mut stale = 0;
    let mut train_loss = Vec::new();
    let mut epochs_run = 0;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n_train).collect();
        order.shuffle(&mut rng::indexed_stream(cfg.seed, "finetune.epoch", epoch as u64));
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut tape = Tape::new();
            let l = loss(&mut tape, params, batch)?;
            grads.zero();
            tape.backward_into(l, &mut grads)?;
            adam.step(params, &grads)?;
            total += tape.value(l).item() * batch.len() as f64;
        }
        train_loss.push(total / n_train.max(1) as f64);
        epochs_run = epoch + 1;
        let score = val_score(params)?;
        if score > best.0 {
            best = (score, epoch, params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale == cfg.patience.div_ceil(2) {
                adam.step_size *= cfg.plateau_decay;
            }
            if stale >= cfg.patience {
                break;
            }
        }
    }
    *params = best.2;
    Ok(TrainSummary { best_epoch: best.1, best_val: best.0, epochs_run, train_loss })
}

/// Mean binary cross-entropy on logits over entries where `mask` is 1.
fn masked_bce(tape: &mut Tape, logits: Var, targets: Tensor, mask: Tensor) -> Result<Var, AutodiffError> {
    let count = mask.data.iter().sum::<f64>().max(1.0);
    let y = tape.constant(targets)?;
    let m = tape.constant(mask)?;
    let sp = tape.softplus(logits)?;
    let yx = tape.mul(y, logits)?;
    let l = tape.sub(sp, yx)?;
    let l = tape.mul(l, m)?;
    let s = tape.sum_all(l)?;
    tape.scale(s, 1.0 / count)
}

fn masked_mse(tape: &mut Tape, preds: Var, targets: Tensor, mask: Tensor) -> Result<Var, AutodiffError> {
    let count = mask.data.iter().sum::<f64>().max(1.0);
    let y = tape.constant(targets)?;
    let m = tape.constant(mask)?;
    let d = tape.sub(preds, y)?;
    let d = tape.mul(d, m)?;
    let sq = tape.mul(d, d)?;
    let s = tape.sum_all(sq)?;
    tape.scale(s, 1.0 / count)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Labelled molecules for a property task; `None` marks a missing label.
#[derive(Debug, Clone)]
pub struct PropertyData {
    pub graphs: Vec<GraphInputs>,
    pub labels: Vec<Vec<Option<f64>>>,
    pub kind: TaskKind,
}

impl PropertyData {
    pub fn tasks(&self) -> usize {
        self.labels.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}

/// Encoder plus property head; regression targets are standardised with
/// the training-set mean and deviation stored in `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyNet {
    pub encoder: Encoder,
    pub head: MlpHead,
    pub kind: TaskKind,
    pub scale: Vec<(f64, f64)>,
}

impl PropertyNet {
    pub fn logits(&self, tape: &mut Tape, store: &ParamStore, graphs: &[&GraphInputs]) -> Result<Var, FinetuneError> {
        let mut rows = Vec::with_capacity(graphs.len());
        for g in graphs {
            rows.push(self.encoder.forward(tape, store, g)?.graph);
        }
        let h = tape.concat_rows(&rows)?;
        Ok(self.head.forward(tape, store, h)?)
    }

    pub fn loss(&self, tape: &mut Tape, store: &ParamStore, data: &PropertyData, idx: &[usize]) -> Result<Var, FinetuneError> {
        let graphs: Vec<&GraphInputs> = idx.iter().map(|&i| &data.graphs[i]).collect();
        let out = self.logits(tape, store, &graphs)?;
        let t = self.head.output;
        let mut y = Tensor::zeros(idx.len(), t);
        let mut mask = Tensor::zeros(idx.len(), t);
        for (r, &i) in idx.iter().enumerate() {
            for (k, label) in data.labels[i].iter().enumerate() {
                if let Some(v) = label {
                    let (mu, sd) = self.scale[k];
                    y.set(r, k, if self.kind == TaskKind::Regression { (v - mu) / sd } else { *v });
                    mask.set(r, k, 1.0);
                }
            }
        }
        Ok(match self.kind {
            TaskKind::BinaryClassification => masked_bce(tape, out, y, mask)?,
            TaskKind::Regression => masked_mse(tape, out, y, mask)?,
        })
    }

    /// Probabilities for classification, target units for regression.
    pub fn predict(&self, store: &ParamStore, graphs: &[&GraphInputs]) -> Result<Vec<Vec<f64>>, FinetuneError> {
        let mut out = Vec::with_capacity(graphs.len());
        for chunk in graphs.chunks(64) {
            let mut tape = Tape::new();
            let v = self.logits(&mut tape, store, chunk)?;
            for row in tape.value(v).to_rows() {
                out.push(
                    row.iter()
                        .enumerate()
                        .map(|(k, &x)| match self.kind {
                            TaskKind::BinaryClassification => sigmoid(x),
                            TaskKind::Regression => x * self.scale[k].1 + self.scale[k].0,
                        })
                        .collect(),
                );
            }
        }
        Ok(out)
    }

    /// Mean per-task metrics over `idx`, tasks lacking labels skipped.
    pub fn evaluate(&self, store: &ParamStore, data: &PropertyData, idx: &[usize]) -> Result<MetricReport, FinetuneError> {
        let graphs: Vec<&GraphInputs> = idx.iter().map(|&i| &data.graphs[i]).collect();
        let preds = self.predict(store, &graphs)?;
        let mut reports = Vec::new();
        for k in 0..self.head.output {
            let (mut l, mut s) = (Vec::new(), Vec::new());
            for (r, &i) in idx.iter().enumerate() {
                if let Some(v) = data.labels[i][k] {
                    l.push(v);
                    s.push(preds[r][k]);
                }
            }
            if !l.is_empty() {
                reports.push(metrics(&l, &s, self.kind)?);
            }
        }
        Ok(MetricReport::mean_std(&reports).0)
    }
}

#[derive(Debug, Clone)]
pub struct PropertyModel {
    pub net: PropertyNet,
    pub params: ParamStore,
}

pub const MP_HEAD: &str = "head.mp";
pub const DDI_HEAD: &str = "head.ddi";

impl PropertyModel {
    /// Fresh head; encoder weights copied from `pretrained` where names match.
    pub fn new(encoder: Encoder, tasks: usize, kind: TaskKind, seed: u64, pretrained: Option<&ParamStore>) -> Self {
        let d = encoder.config.d;
        let head = MlpHead { prefix: MP_HEAD.into(), input: d, hidden: d, output: tasks, slope: encoder.config.leaky_slope };
        let mut params = ParamStore::new();
        encoder.init_params(&mut params);
        head.init_params(&mut params, seed);
        if let Some(p) = pretrained {
            let n = params.load_matching(p);
            log::info!("loaded {n} pretrained tensors");
        }
        PropertyModel { net: PropertyNet { encoder, head, kind, scale: vec![(0.0, 1.0); tasks] }, params }
    }

    /// Standardisation from the labels of `idx` (regression only).
    pub fn fit_scale(&mut self, data: &PropertyData, idx: &[usize]) {
        if self.net.kind != TaskKind::Regression {
            return;
        }
        for k in 0..self.net.head.output {
            let xs: Vec<f64> = idx.iter().filter_map(|&i| data.labels[i][k]).collect();
            if xs.is_empty() {
                continue;
            }
            let mu = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / xs.len() as f64;
            self.net.scale[k] = (mu, var.sqrt().max(1e-6));
        }
    }

    /// Validation score: negative cross-entropy for classification (AUC
    /// saturates on small validation sets), negative RMSE for regression.
    pub fn val_score(net: &PropertyNet, store: &ParamStore, data: &PropertyData, val: &[usize]) -> Result<f64, FinetuneError> {
        match net.kind {
            TaskKind::BinaryClassification => Ok(-loss_value(net, store, data, val)?),
            TaskKind::Regression => Ok(net.evaluate(store, data, val)?.rmse.map_or(f64::NEG_INFINITY, |e| -e)),
        }
    }

    pub fn train_fold(&mut self, data: &PropertyData, fold: &Fold, cfg: &FinetuneConfig) -> Result<TrainSummary, FinetuneError> {
        self.fit_scale(data, &fold.train);
        let net = &self.net;
        fit(
            &mut self.params,
            cfg,
            fold.train.len(),
            |t, s, batch| {
                let idx: Vec<usize> = batch.iter().map(|&b| fold.train[b]).collect();
                net.loss(t, s, data, &idx)
            },
            |s| Self::val_score(net, s, data, &fold.val),
        )
    }
}

fn loss_value(net: &PropertyNet, store: &ParamStore, data: &PropertyData, idx: &[usize]) -> Result<f64, FinetuneError> {
    let mut tape = Tape::new();
    let l = net.loss(&mut tape, store, data, idx)?;
    Ok(tape.value(l).item())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub test: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    pub mean: MetricReport,
    pub std: MetricReport,
}

impl CvReport {
    pub fn from_folds(folds: Vec<FoldReport>) -> Self {
        let tests: Vec<MetricReport> = folds.iter().map(|f| f.test.clone()).collect();
        let (mean, std) = MetricReport::mean_std(&tests);
        CvReport { folds, mean, std }
    }
}

/// Cross-validated fine-tuning; each fold starts from the same initial
/// (optionally pretrained) weights. Returns the report and the fold models.
pub fn finetune_property(
    init: &PropertyModel,
    data: &PropertyData,
    cfg: &FinetuneConfig,
    only_folds: Option<usize>,
) -> Result<(CvReport, Vec<PropertyModel>), FinetuneError> {
    let folds = kfold_splits(data.len(), cfg.folds, cfg.seed)?;
    let mut reports = Vec::new();
    let mut models = Vec::new();
    for (f, fold) in folds.iter().enumerate().take(only_folds.unwrap_or(cfg.folds)) {
        let mut model = init.clone();
        let summary = model.train_fold(data, fold, cfg)?;
        let test = model.net.evaluate(&model.params, data, &fold.test)?;
        log::info!("fold {f}: best epoch {} of {}", summary.best_epoch, summary.epochs_run);
        reports.push(FoldReport { fold: f, best_epoch: summary.best_epoch, epochs_run: summary.epochs_run, test });
        models.push(model);
    }
    Ok((CvReport::from_folds(reports), models))
}

/// Encoder plus pair head over `[h_a, h_b]`; with `symmetrize` the logit is
/// the mean over both argument orders.
#[derive(Debug, Clone, PartialEq)]
pub struct DdiNet {
    pub encoder: Encoder,
    pub head: MlpHead,
    pub symmetrize: bool,
}

impl DdiNet {
    pub fn logits(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graphs: &[GraphInputs],
        pairs: &[Pair],
    ) -> Result<Var, FinetuneError> {
        let mut slot: BTreeMap<usize, usize> = BTreeMap::new();
        let mut rows = Vec::new();
        for &(a, b, _) in pairs {
            for m in [a, b] {
                if let std::collections::btree_map::Entry::Vacant(e) = slot.entry(m) {
                    e.insert(rows.len());
                    rows.push(self.encoder.forward(tape, store, &graphs[m])?.graph);
                }
            }
        }
        let h = tape.concat_rows(&rows)?;
        let ia = Rc::new(pairs.iter().map(|p| slot[&p.0]).collect::<Vec<_>>());
        let ib = Rc::new(pairs.iter().map(|p| slot[&p.1]).collect::<Vec<_>>());
        let ha = tape.gather_rows(h, ia)?;
        let hb = tape.gather_rows(h, ib)?;
        let ab = tape.concat_cols(&[ha, hb])?;
        let x = self.head.forward(tape, store, ab)?;
        if !self.symmetrize {
            return Ok(x);
        }
        let ba = tape.concat_cols(&[hb, ha])?;
        let y = self.head.forward(tape, store, ba)?;
        let s = tape.add(x, y)?;
        Ok(tape.scale(s, 0.5)?)
    }

    pub fn loss(&self, tape: &mut Tape, store: &ParamStore, graphs: &[GraphInputs], pairs: &[Pair]) -> Result<Var, FinetuneError> {
        let x = self.logits(tape, store, graphs, pairs)?;
        let y = Tensor::from_vec(pairs.len(), 1, pairs.iter().map(|p| p.2 as u8 as f64).collect())?;
        Ok(masked_bce(tape, x, y, Tensor::filled(pairs.len(), 1, 1.0))?)
    }

    pub fn predict(&self, store: &ParamStore, graphs: &[GraphInputs], pairs: &[Pair]) -> Result<Vec<f64>, FinetuneError> {
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(64) {
            let mut tape = Tape::new();
            let x = self.logits(&mut tape, store, graphs, chunk)?;
            out.extend(tape.value(x).data.iter().map(|&v| sigmoid(v)));
        }
        Ok(out)
    }

    pub fn evaluate(&self, store: &ParamStore, graphs: &[GraphInputs], pairs: &[Pair]) -> Result<MetricReport, FinetuneError> {
        let scores = self.predict(store, graphs, pairs)?;
        let labels: Vec<f64> = pairs.iter().map(|p| p.2 as u8 as f64).collect();
        metrics(&labels, &scores, TaskKind::BinaryClassification)
    }
}

#[derive(Debug, Clone)]
pub struct DdiModel {
    pub net: DdiNet,
    pub params: ParamStore,
}

impl DdiModel {
    pub fn new(encoder: Encoder, symmetrize: bool, seed: u64, pretrained: Option<&ParamStore>) -> Self {
        let d = encoder.config.d;
        let head = MlpHead { prefix: DDI_HEAD.into(), input: 2 * d, hidden: d, output: 1, slope: encoder.config.leaky_slope };
        let mut params = ParamStore::new();
        encoder.init_params(&mut params);
        head.init_params(&mut params, seed);
        if let Some(p) = pretrained {
            params.load_matching(p);
        }
        DdiModel { net: DdiNet { encoder, head, symmetrize }, params }
    }

    /// Train on `train`, early-stopping on accuracy over `val`.
    pub fn train(
        &mut self,
        graphs: &[GraphInputs],
        train: &[Pair],
        val: &[Pair],
        cfg: &FinetuneConfig,
    ) -> Result<TrainSummary, FinetuneError> {
        let net = &self.net;
        fit(
            &mut self.params,
            cfg,
            train.len(),
            |t, s, batch| {
                let pairs: Vec<Pair> = batch.iter().map(|&b| train[b]).collect();
                net.loss(t, s, graphs, &pairs)
            },
            |s| {
                let r = net.evaluate(s, graphs, val)?;
                let mut t = Tape::new();
                let l = net.loss(&mut t, s, graphs, val)?;
                Ok(r.accuracy.unwrap_or(0.0) - 1e-3 * t.value(l).item())
            },
        )
    }
}
