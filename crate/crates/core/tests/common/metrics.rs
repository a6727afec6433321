//! Exhaustive ranking-metric oracles over random label sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_case(seed: u64) -> (Vec<bool>, Vec<f64>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = r.random_range(2..=50);
    let mut labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.4)).collect();
    labels[0] = true;
    labels[1] = false;
    // Coarse scores so that ties are common.
    let levels = r.random_range(2..12);
    let scores = (0..n).map(|_| r.random_range(0..levels) as f64 / levels as f64).collect();
    (labels, scores)
}

pub fn pairwise_auc(labels: &[bool], scores: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

/// Sum over distinct thresholds of recall increment times precision, each
/// threshold evaluated from scratch over the whole list.
pub fn exhaustive_ap(labels: &[bool], scores: &[f64]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let (mut ap, mut prev) = (0.0, 0.0);
    for t in thresholds {
        let predicted: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= t).collect();
        let tp = predicted.iter().filter(|&&i| labels[i]).count() as f64;
        let recall = tp / pos;
        ap += (recall - prev) * tp / predicted.len() as f64;
        prev = recall;
    }
    ap
}

pub fn definitional_f1(labels: &[bool], scores: &[f64]) -> f64 {
    let pred: Vec<bool> = scores.iter().map(|&s| s >= 0.5).collect();
    let tp = (0..labels.len()).filter(|&i| labels[i] && pred[i]).count() as f64;
    let pp = pred.iter().filter(|&&p| p).count() as f64;
    let ap = labels.iter().filter(|&&l| l).count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    let (p, r) = (tp / pp, tp / ap);
    2.0 * p * r / (p + r)
}
