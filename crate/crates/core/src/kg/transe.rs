use rand::seq::SliceRandom;
use rand::Rng;

use super::{EmbeddingTable, KnowledgeGraph};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransEConfig {
    pub dim: usize,
    pub epochs: usize,
    pub margin: f64,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for TransEConfig {
    fn default() -> Self {
        TransEConfig { dim: 32, epochs: 200, margin: 1.0, step_size: 0.01, seed: 0 }
    }
}

/// Translational embeddings: a triple `(h, r, t)` has energy `|h + r - t|`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransE {
    pub entities: Vec<Vec<f64>>,
    pub relations: Vec<Vec<f64>>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

impl TransE {
    fn init(kg: &KnowledgeGraph, cfg: &TransEConfig) -> Self {
        let mut r = rng::stream(cfg.seed, "transe.init");
        let bound = 6.0 / (cfg.dim as f64).sqrt();
        let mut draw = |count: usize| -> Vec<Vec<f64>> {
            (0..count)
                .map(|_| {
                    let mut v: Vec<f64> = (0..cfg.dim).map(|_| r.random_range(-bound..bound)).collect();
                    normalize(&mut v);
                    v
                })
                .collect()
        };
        let entities = draw(kg.entities.len());
        let relations = draw(kg.relations.len());
        TransE { entities, relations }
    }

    fn residual(&self, h: usize, r: usize, t: usize) -> Vec<f64> {
        let (h, r, t) = (&self.entities[h], &self.relations[r], &self.entities[t]);
        (0..h.len()).map(|i| h[i] + r[i] - t[i]).collect()
    }

    pub fn energy(&self, h: usize, r: usize, t: usize) -> f64 {
        norm(&self.residual(h, r, t))
    }

    /// Apply `-step * sign * d|h+r-t|` to the triple's vectors.
    fn descend(&mut self, (h, r, t): (usize, usize, usize), sign: f64, step: f64) {
        let res = self.residual(h, r, t);
        let n = norm(&res);
        if n == 0.0 {
            return;
        }
        for i in 0..res.len() {
            let g = sign * step * res[i] / n;
            self.entities[h][i] -= g;
            self.relations[r][i] -= g;
            self.entities[t][i] += g;
        }
    }

    fn renormalize(&mut self) {
        self.entities.iter_mut().for_each(|v| normalize(v));
    }

    pub fn to_table(&self, kg: &KnowledgeGraph) -> EmbeddingTable {
        let names = kg.entities.iter().map(|e| e.name.clone()).collect();
        EmbeddingTable::new(names, self.entities.clone()).expect("trained vectors share a dimension")
    }

    pub fn train(kg: &KnowledgeGraph, cfg: &TransEConfig) -> Self {
        Self::train_observed(kg, cfg, |_, _| {})
    }

    /// Train, calling `observe(epoch, model)` after every epoch.
    pub fn train_observed(kg: &KnowledgeGraph, cfg: &TransEConfig, mut observe: impl FnMut(usize, &TransE)) -> Self {
        assert!(!kg.triples.is_empty(), "TransE needs at least one triple");
        assert!(cfg.dim >= 2, "TransE needs dim >= 2");
        let mut model = Self::init(kg, cfg);
        let n = kg.entities.len();
        let mut order: Vec<usize> = (0..kg.triples.len()).collect();
        for epoch in 0..cfg.epochs {
            let mut r = rng::indexed_stream(cfg.seed, "transe.epoch", epoch as u64);
            order.shuffle(&mut r);
            for &ti in &order {
                let (h, rel, t) = kg.triples[ti];
                let corrupt = r.random_range(0..n);
                let neg = if r.random_bool(0.5) { (corrupt, rel, t) } else { (h, rel, corrupt) };
                let hinge = cfg.margin + model.energy(h, rel, t) - model.energy(neg.0, neg.1, neg.2);
                if hinge > 0.0 {
                    model.descend((h, rel, t), 1.0, cfg.step_size);
                    model.descend(neg, -1.0, cfg.step_size);
                }
            }
            model.renormalize();
            observe(epoch, &model);
        }
        model
    }
}

/// Mean hinge `max(0, margin + E(pos) - E(neg))` over every triple and every
/// head or tail corruption that replaces the entity with a different one.
pub fn margin_loss(model: &TransE, kg: &KnowledgeGraph, margin: f64) -> f64 {
    let n = kg.entities.len();
    let mut total = 0.0;
    let mut count = 0usize;
    for &(h, r, t) in &kg.triples {
        let pos = model.energy(h, r, t);
        for e in 0..n {
            if e != h {
                total += (margin + pos - model.energy(e, r, t)).max(0.0);
                count += 1;
            }
            if e != t {
                total += (margin + pos - model.energy(h, r, e)).max(0.0);
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

pub fn train_transe(kg: &KnowledgeGraph, cfg: &TransEConfig) -> EmbeddingTable {
    TransE::train(kg, cfg).to_table(kg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::parse_triples;

    fn toy() -> KnowledgeGraph {
        parse_triples(
            "DB00001\ttargets\tGene::A\nDB00002\ttargets\tGene::B\nDB00001\tinteracts\tDB00002\n\
             Gene::A\tpartOf\tPathway::P\nGene::B\tpartOf\tPathway::P\n",
        )
        .unwrap()
    }

    #[test]
    fn hinge_is_zero_when_margin_met() {
        let model = TransE { entities: vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![5.0, 0.0]], relations: vec![vec![0.0, 0.0]] };
        // positive (0,0,1) has energy 0, negative (0,0,2) has energy 5
        let hinge: f64 = (1.0 + model.energy(0, 0, 1) - model.energy(0, 0, 2)).max(0.0);
        assert_eq!(hinge, 0.0);
    }

    #[test]
    fn true_triples_beat_corruptions() {
        let kg = toy();
        let model = TransE::train(&kg, &TransEConfig { dim: 8, epochs: 200, margin: 1.0, step_size: 0.01, seed: 3 });
        let n = kg.entities.len();
        let pos: f64 = kg.triples.iter().map(|&(h, r, t)| model.energy(h, r, t)).sum::<f64>() / kg.triples.len() as f64;
        let mut neg = 0.0;
        let mut count = 0;
        for &(h, r, t) in &kg.triples {
            for e in 0..n {
                if e != t {
                    neg += model.energy(h, r, e);
                    count += 1;
                }
            }
        }
        assert!(pos < neg / count as f64);
    }

    #[test]
    fn deterministic() {
        let kg = toy();
        let cfg = TransEConfig { dim: 4, epochs: 20, seed: 11, ..TransEConfig::default() };
        assert_eq!(train_transe(&kg, &cfg), train_transe(&kg, &cfg));
    }

    #[test]
    fn loss_decreases_over_first_fifty_epochs() {
        let kg = toy();
        let cfg = TransEConfig { dim: 8, epochs: 50, margin: 1.0, step_size: 0.01, seed: 5 };
        let mut losses = vec![margin_loss(&TransE::init(&kg, &cfg), &kg, cfg.margin)];
        TransE::train_observed(&kg, &cfg, |_, m| losses.push(margin_loss(m, &kg, cfg.margin)));
        for w in losses.windows(2) {
            assert!(w[1] < w[0], "{losses:?}");
        }
    }
}
