use serde::{Deserialize, Serialize};

use super::FinetuneError;

fn check_lengths(a: usize, b: usize) -> Result<(), FinetuneError> {
    if a != b {
        return Err(FinetuneError::LengthMismatch { labels: a, scores: b });
    }
    Ok(())
}

fn class_counts(labels: &[bool]) -> Result<(usize, usize), FinetuneError> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(FinetuneError::DegenerateLabels);
    }
    Ok((pos, neg))
}

/// Area under the ROC curve from mid-ranks, so tied scores count half.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Result<f64, FinetuneError> {
    check_lengths(labels.len(), scores.len())?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Step-interpolated area under precision-recall, one step per distinct
/// score threshold.
pub fn average_precision(labels: &[bool], scores: &[f64]) -> Result<f64, FinetuneError> {
    check_lengths(labels.len(), scores.len())?;
    let (pos, _) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut prev_recall, mut ap) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        tp += order[i..=j].iter().filter(|&&k| labels[k]).count();
        seen += j - i + 1;
        let recall = tp as f64 / pos as f64;
        ap += (recall - prev_recall) * tp as f64 / seen as f64;
        prev_recall = recall;
        i = j + 1;
    }
    Ok(ap)
}

pub const THRESHOLD: f64 = 0.5;

/// F1 of `score >= 0.5`; zero when there are no true or predicted positives.
pub fn f1_score(labels: &[bool], scores: &[f64]) -> Result<f64, FinetuneError> {
    check_lengths(labels.len(), scores.len())?;
    let (mut tp, mut fp, mut fnn) = (0.0, 0.0, 0.0);
    for (&l, &s) in labels.iter().zip(scores) {
        match (l, s >= THRESHOLD) {
            (true, true) => tp += 1.0,
            (false, true) => fp += 1.0,
            (true, false) => fnn += 1.0,
            _ => {}
        }
    }
    let denom = 2.0 * tp + fp + fnn;
    Ok(if denom == 0.0 { 0.0 } else { 2.0 * tp / denom })
}

pub fn accuracy(labels: &[bool], scores: &[f64]) -> Result<f64, FinetuneError> {
    check_lengths(labels.len(), scores.len())?;
    if labels.is_empty() {
        return Err(FinetuneError::DegenerateLabels);
    }
    let hits = labels.iter().zip(scores).filter(|(&l, &s)| l == (s >= THRESHOLD)).count();
    Ok(hits as f64 / labels.len() as f64)
}

pub fn mse(targets: &[f64], preds: &[f64]) -> Result<f64, FinetuneError> {
    check_lengths(targets.len(), preds.len())?;
    if targets.is_empty() {
        return Err(FinetuneError::DegenerateLabels);
    }
    Ok(targets.iter().zip(preds).map(|(t, p)| (t - p) * (t - p)).sum::<f64>() / targets.len() as f64)
}

pub fn rmse(targets: &[f64], preds: &[f64]) -> Result<f64, FinetuneError> {
    Ok(mse(targets, preds)?.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    BinaryClassification,
    Regression,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub average_precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
}

impl MetricReport {
    fn fields(&self) -> [Option<f64>; 6] {
        [self.roc_auc, self.average_precision, self.f1, self.accuracy, self.rmse, self.mse]
    }

    fn from_fields(f: [Option<f64>; 6]) -> Self {
        MetricReport { roc_auc: f[0], average_precision: f[1], f1: f[2], accuracy: f[3], rmse: f[4], mse: f[5] }
    }

    /// Per-field mean and population standard deviation over `reports`.
    pub fn mean_std(reports: &[MetricReport]) -> (MetricReport, MetricReport) {
        let mut mean = [None; 6];
        let mut std = [None; 6];
        for k in 0..6 {
            let xs: Vec<f64> = reports.iter().filter_map(|r| r.fields()[k]).collect();
            if xs.is_empty() {
                continue;
            }
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
            mean[k] = Some(m);
            std[k] = Some(v.sqrt());
        }
        (Self::from_fields(mean), Self::from_fields(std))
    }
}

/// Metrics for one task column. Classification scores are probabilities;
/// ranking metrics are left empty when only one class is present.
pub fn metrics(labels: &[f64], scores: &[f64], kind: TaskKind) -> Result<MetricReport, FinetuneError> {
    check_lengths(labels.len(), scores.len())?;
    match kind {
        TaskKind::Regression => {
            let m = mse(labels, scores)?;
            Ok(MetricReport { mse: Some(m), rmse: Some(m.sqrt()), ..Default::default() })
        }
        TaskKind::BinaryClassification => {
            let classes: Vec<bool> = labels.iter().map(|&l| l >= 0.5).collect();
            Ok(MetricReport {
                roc_auc: roc_auc(&classes, scores).ok(),
                average_precision: average_precision(&classes, scores).ok(),
                f1: Some(f1_score(&classes, scores)?),
                accuracy: Some(accuracy(&classes, scores)?),
                ..Default::default()
            })
        }
    }
}
