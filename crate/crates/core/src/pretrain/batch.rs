use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;

use super::PretrainError;
use crate::chem::{BondOrder, MolecularGraph};
use crate::rng::{self, fnv1a};

pub const FINGERPRINT_BITS: usize = 128;
pub const FINGERPRINT_PATH_LEN: usize = 3;

fn atom_token(mol: &MolecularGraph, i: usize) -> String {
    let a = &mol.atoms[i];
    if a.aromatic {
        a.element.symbol().to_lowercase()
    } else {
        a.element.symbol().to_string()
    }
}

fn bond_token(order: BondOrder) -> char {
    match order {
        BondOrder::Single => '-',
        BondOrder::Double => '=',
        BondOrder::Triple => '#',
        BondOrder::Aromatic => ':',
    }
}

/// Folded path fingerprint: every simple path of up to three bonds, written
/// as alternating atom/bond tokens in its lexicographically smaller
/// direction, sets bit `hash % 128`.
pub fn fingerprint(mol: &MolecularGraph) -> Vec<f64> {
    let mut bits = vec![0.0; FINGERPRINT_BITS];
    let mut path = Vec::new();
    fn walk(mol: &MolecularGraph, path: &mut Vec<usize>, bits: &mut [f64]) {
        let mut fwd = Vec::new();
        for (k, &a) in path.iter().enumerate() {
            if k > 0 {
                let b = mol.bond_between(path[k - 1], a).expect("path follows bonds");
                fwd.push(bond_token(mol.bonds[b].order).to_string());
            }
            fwd.push(atom_token(mol, a));
        }
        let rev: Vec<String> = fwd.iter().rev().cloned().collect();
        let key = fwd.min(rev).join("");
        bits[(fnv1a(key.as_bytes()) % FINGERPRINT_BITS as u64) as usize] = 1.0;
        if path.len() > FINGERPRINT_PATH_LEN {
            return;
        }
        let last = *path.last().expect("non-empty path");
        for &(nb, _) in mol.neighbors(last) {
            if !path.contains(&nb) {
                path.push(nb);
                walk(mol, path, bits);
                path.pop();
            }
        }
    }
    for start in 0..mol.atom_count() {
        path.push(start);
        walk(mol, &mut path, &mut bits);
        path.pop();
    }
    bits
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster of each point.
    pub assignment: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    /// Sum of squared point-to-center distances.
    pub objective: f64,
}

impl Clustering {
    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == c).collect()
    }
}

const KMEANS_MAX_ITER: usize = 100;
const KMEANS_TOL: f64 = 1e-6;
const KMEANS_RESTARTS: u64 = 10;

fn plus_plus_init(points: &[Vec<f64>], k: usize, r: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[r.random_range(0..points.len())].clone()];
    while centers.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| squared_distance(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let pick = if total <= 0.0 {
            r.random_range(0..points.len())
        } else {
            let mut x = r.random_range(0.0..total);
            let mut idx = d.len() - 1;
            for (i, di) in d.iter().enumerate() {
                if x < *di {
                    idx = i;
                    break;
                }
                x -= di;
            }
            idx
        };
        centers.push(points[pick].clone());
    }
    centers
}

/// Points claim their nearest center with room left, closest points first.
fn capacity_assign(points: &[Vec<f64>], centers: &[Vec<f64>], capacity: usize) -> Vec<usize> {
    let dist: Vec<Vec<f64>> = points.iter().map(|p| centers.iter().map(|c| squared_distance(p, c)).collect()).collect();
    let nearest = |i: usize| dist[i].iter().cloned().fold(f64::INFINITY, f64::min);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| nearest(a).total_cmp(&nearest(b)).then(a.cmp(&b)));
    let mut load = vec![0; centers.len()];
    let mut assignment = vec![0; points.len()];
    for i in order {
        let mut prefs: Vec<usize> = (0..centers.len()).collect();
        prefs.sort_by(|&a, &b| dist[i][a].total_cmp(&dist[i][b]).then(a.cmp(&b)));
        let c = prefs.into_iter().find(|&c| load[c] < capacity).expect("total capacity covers all points");
        load[c] += 1;
        assignment[i] = c;
    }
    assignment
}

/// Move points into clusters with room, or swap pairs across clusters,
/// while either lowers the distance to the fixed centers.
fn refine(points: &[Vec<f64>], centers: &[Vec<f64>], assignment: &mut [usize], capacity: usize) {
    let dist: Vec<Vec<f64>> = points.iter().map(|p| centers.iter().map(|c| squared_distance(p, c)).collect()).collect();
    let mut load = vec![0; centers.len()];
    for &a in assignment.iter() {
        load[a] += 1;
    }
    loop {
        let mut improved = false;
        for i in 0..points.len() {
            for c in 0..centers.len() {
                let from = assignment[i];
                if c != from && load[c] < capacity && dist[i][c] + 1e-12 < dist[i][from] {
                    load[from] -= 1;
                    load[c] += 1;
                    assignment[i] = c;
                    improved = true;
                }
            }
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let (a, b) = (assignment[i], assignment[j]);
                if a != b && dist[i][b] + dist[j][a] + 1e-12 < dist[i][a] + dist[j][b] {
                    assignment[i] = b;
                    assignment[j] = a;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, capacity: usize) -> Clustering {
    let dim = points[0].len();
    let mut assignment = capacity_assign(points, &centers, capacity);
    refine(points, &centers, &mut assignment, capacity);
    for _ in 0..KMEANS_MAX_ITER {
        let mut moved: f64 = 0.0;
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&assignment).filter(|(_, &a)| a == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            let mut mean = vec![0.0; dim];
            for p in &members {
                for (m, x) in mean.iter_mut().zip(p.iter()) {
                    *m += x / members.len() as f64;
                }
            }
            moved = moved.max(squared_distance(center, &mean).sqrt());
            *center = mean;
        }
        assignment = capacity_assign(points, &centers, capacity);
        refine(points, &centers, &mut assignment, capacity);
        if moved < KMEANS_TOL {
            break;
        }
    }
    let objective = points.iter().zip(&assignment).map(|(p, &c)| squared_distance(p, &centers[c])).sum();
    Clustering { assignment, centers, objective }
}

/// K-means with at most `capacity` points per cluster and
/// `ceil(n / capacity)` clusters; the best of a few seeded restarts.
pub fn constrained_kmeans(points: &[Vec<f64>], capacity: usize, seed: u64) -> Result<Clustering, PretrainError> {
    if points.is_empty() {
        return Err(PretrainError::EmptyInput);
    }
    if capacity == 0 {
        return Err(PretrainError::Config("cluster capacity must be at least 1".into()));
    }
    let k = points.len().div_ceil(capacity);
    let mut best: Option<Clustering> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut r = rng::indexed_stream(seed, "kmeans.init", restart);
        let run = lloyd(points, plus_plus_init(points, k, &mut r), capacity);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// The `count` candidates closest to `center`, nearest first, ties by id.
pub fn nearest_neighbors(
    center: &[f64],
    candidates: &[usize],
    points: &[Vec<f64>],
    count: usize,
) -> Result<Vec<usize>, PretrainError> {
    if count > candidates.len() {
        return Err(PretrainError::InsufficientCandidates { needed: count, available: candidates.len() });
    }
    let mut ranked: Vec<(f64, usize)> = candidates.iter().map(|&c| (squared_distance(center, &points[c]), c)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(ranked.into_iter().take(count).map(|(_, c)| c).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniBatch {
    /// Non-drug ids first, then drug ids.
    pub items: Vec<usize>,
    pub drug_count: usize,
    pub nn_drugs: Vec<usize>,
    pub random_drugs: Vec<usize>,
}

impl MiniBatch {
    pub fn non_drug(&self) -> &[usize] {
        &self.items[..self.items.len() - self.drug_count]
    }

    pub fn drugs(&self) -> &[usize] {
        &self.items[self.items.len() - self.drug_count..]
    }
}

/// Drug slots and non-drug capacity for batch size `n_batch`.
pub fn batch_split(n_batch: usize) -> (usize, usize) {
    let drugs = (0.3 * n_batch as f64).round() as usize;
    (drugs, n_batch - drugs)
}

/// Clustered non-drug members and nearest-drug fill of every batch; the
/// random drug complement is drawn per round by [`BatchPlan::draw`].
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    pub slots: usize,
    pub n_random: usize,
    /// `(non-drug members, nearest drugs)` per batch.
    pub batches: Vec<(Vec<usize>, Vec<usize>)>,
    /// Drugs never used as nearest neighbours.
    pub complement: Vec<usize>,
    pub seed: u64,
}

impl BatchPlan {
    /// Batches for `round`, with a fresh uniform draw of random drugs.
    pub fn draw(&self, round: u64) -> Vec<MiniBatch> {
        self.batches
            .iter()
            .enumerate()
            .map(|(b, (members, nn))| {
                let mut r = rng::indexed_stream(self.seed, &format!("batches.random.{round}"), b as u64);
                let mut random: Vec<usize> = sample(&mut r, self.complement.len(), self.n_random)
                    .into_iter()
                    .map(|i| self.complement[i])
                    .collect();
                random.sort_unstable();
                let mut items = members.clone();
                items.extend(nn);
                items.extend(&random);
                MiniBatch { items, drug_count: self.slots, nn_drugs: nn.clone(), random_drugs: random }
            })
            .collect()
    }
}

/// Cluster non-drug molecules, then give each cluster its nearest unused
/// drug molecules. `points` is indexed by molecule id.
pub fn plan_batches(
    non_drug: &[usize],
    drug: &[usize],
    points: &[Vec<f64>],
    n_batch: usize,
    n_random: usize,
    seed: u64,
) -> Result<BatchPlan, PretrainError> {
    let (slots, capacity) = batch_split(n_batch);
    if n_batch < 4 {
        return Err(PretrainError::Config(format!("batch size {n_batch} is below 4")));
    }
    if n_random > slots {
        return Err(PretrainError::Config(format!("random drug count {n_random} exceeds {slots} drug slots")));
    }
    if non_drug.is_empty() {
        return Err(PretrainError::EmptyInput);
    }
    if non_drug.len() < capacity {
        return Err(PretrainError::Config(format!(
            "{} non-drug molecules cannot fill a cluster of {capacity}",
            non_drug.len()
        )));
    }
    let nn_count = slots - n_random;
    let clusters = non_drug.len().div_ceil(capacity);
    let needed = clusters * nn_count + n_random;
    if drug.is_empty() || drug.len() < needed {
        return Err(PretrainError::InsufficientDrugMolecules { needed: needed.max(1), available: drug.len() });
    }

    let nd_points: Vec<Vec<f64>> = non_drug.iter().map(|&i| points[i].clone()).collect();
    let clustering = constrained_kmeans(&nd_points, capacity, seed)?;
    let mut used = BTreeSet::new();
    let mut batches = Vec::with_capacity(clusters);
    for c in 0..clusters {
        let center = &clustering.centers[c];
        let mut members: Vec<usize> = clustering.members(c).into_iter().map(|i| non_drug[i]).collect();
        if members.len() < capacity {
            // top up from the nearest non-drug molecules outside the cluster
            let outside: Vec<usize> = non_drug.iter().copied().filter(|i| !members.contains(i)).collect();
            let need = capacity - members.len();
            members.extend(nearest_neighbors(center, &outside, points, need)?);
        }
        let free: Vec<usize> = drug.iter().copied().filter(|d| !used.contains(d)).collect();
        let nn = nearest_neighbors(center, &free, points, nn_count)?;
        used.extend(nn.iter().copied());
        batches.push((members, nn));
    }
    let complement = drug.iter().copied().filter(|d| !used.contains(d)).collect();
    Ok(BatchPlan { slots, n_random, batches, complement, seed })
}

/// Batches of exactly `n_batch`: clustered non-drug molecules, nearest
/// unused drugs, then `n_random` drugs drawn from those never used as
/// neighbours.
pub fn generate_batches(
    non_drug: &[usize],
    drug: &[usize],
    points: &[Vec<f64>],
    n_batch: usize,
    n_random: usize,
    seed: u64,
) -> Result<Vec<MiniBatch>, PretrainError> {
    Ok(plan_batches(non_drug, drug, points, n_batch, n_random, seed)?.draw(0))
}
