use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use sha2::{Digest, Sha256};

use super::{AutodiffError, Tensor};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub group: String,
    pub value: Tensor,
}

/// Named, grouped parameters in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: &str, group: &str, value: Tensor) -> usize {
        assert!(!self.index.contains_key(name), "duplicate parameter `{name}`");
        self.params.push(Param { name: name.to_string(), group: group.to_string(), value });
        self.index.insert(name.to_string(), self.params.len() - 1);
        self.params.len() - 1
    }

    /// Uniform in `[-bound, bound]` from a stream keyed by `seed` and the
    /// parameter name, so each tensor's draw is independent of the others.
    pub fn insert_uniform(&mut self, name: &str, group: &str, rows: usize, cols: usize, bound: f64, seed: u64) -> usize {
        let mut r = rng::stream(seed, name);
        let data = (0..rows * cols).map(|_| r.random_range(-bound..=bound)).collect();
        self.insert(name, group, Tensor { rows, cols, data })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, id: usize) -> &Param {
        &self.params[id]
    }

    pub fn get_mut(&mut self, id: usize) -> &mut Param {
        &mut self.params[id]
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.id(name).map(|i| &self.params[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn groups(&self) -> Vec<String> {
        let mut g: Vec<String> = Vec::new();
        for p in &self.params {
            if !g.contains(&p.group) {
                g.push(p.group.clone());
            }
        }
        g
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Copy parameters present in `other` (same name and shape) into self;
    /// returns how many were copied.
    pub fn load_matching(&mut self, other: &ParamStore) -> usize {
        let mut n = 0;
        for p in &mut self.params {
            if let Some(q) = other.by_name(&p.name) {
                if q.value.shape() == p.value.shape() {
                    p.value = q.value.clone();
                    n += 1;
                }
            }
        }
        n
    }
}

/// Gradient accumulators aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub grads: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Gradients { grads: store.iter().map(|p| Tensor::zeros(p.value.rows, p.value.cols)).collect() }
    }

    pub fn zero(&mut self) {
        for g in &mut self.grads {
            g.data.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn accumulate(&mut self, id: usize, g: &Tensor) -> Result<(), AutodiffError> {
        let slot = &mut self.grads[id];
        if slot.shape() != g.shape() {
            return Err(AutodiffError::ShapeMismatch { op: "accumulate", left: slot.shape(), right: g.shape() });
        }
        slot.add_assign(g);
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.grads {
            g.data.iter_mut().for_each(|x| *x *= s);
        }
    }
}

pub fn sgd_step(store: &mut ParamStore, grads: &Gradients, step_size: f64) -> Result<(), AutodiffError> {
    check_shapes(store, grads)?;
    for (p, g) in store.params.iter_mut().zip(&grads.grads) {
        for (x, d) in p.value.data.iter_mut().zip(&g.data) {
            *x -= step_size * d;
        }
    }
    Ok(())
}

fn check_shapes(store: &ParamStore, grads: &Gradients) -> Result<(), AutodiffError> {
    if store.len() != grads.grads.len() {
        return Err(AutodiffError::ShapeMismatch { op: "optimizer", left: (store.len(), 0), right: (grads.grads.len(), 0) });
    }
    for (p, g) in store.params.iter().zip(&grads.grads) {
        if p.value.shape() != g.shape() {
            return Err(AutodiffError::ShapeMismatch { op: "optimizer", left: p.value.shape(), right: g.shape() });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, step_size: f64) -> Self {
        Self::with_moments(store, step_size, 0.9, 0.999, 1e-8)
    }

    pub fn with_moments(store: &ParamStore, step_size: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = Gradients::zeros_like(store).grads;
        Adam { step_size, beta1, beta2, eps, t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<(), AutodiffError> {
        check_shapes(store, grads)?;
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for (i, (p, g)) in store.params.iter_mut().zip(&grads.grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for k in 0..g.data.len() {
                let d = g.data[k];
                m.data[k] = self.beta1 * m.data[k] + (1.0 - self.beta1) * d;
                v.data[k] = self.beta2 * v.data[k] + (1.0 - self.beta2) * d * d;
                let mhat = m.data[k] / b1t;
                let vhat = v.data[k] / b2t;
                p.value.data[k] -= self.step_size * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Free-function form of [`Adam::step`].
pub fn adam_step(store: &mut ParamStore, state: &mut Adam, grads: &Gradients) -> Result<(), AutodiffError> {
    state.step(store, grads)
}

const MAGIC: &[u8; 8] = b"HMGCKPT1";

/// Binary checkpoint: magic, parameter count, then per parameter its name,
/// group, rank, dims and little-endian f64 values; then the config text and
/// its SHA-256 digest.
pub fn encode_checkpoint(store: &ParamStore, config: &str) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    let put_str = |out: &mut Vec<u8>, s: &str| {
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    };
    for p in store.iter() {
        put_str(&mut out, &p.name);
        put_str(&mut out, &p.group);
        out.extend_from_slice(&2u32.to_le_bytes());
        out.extend_from_slice(&(p.value.rows as u64).to_le_bytes());
        out.extend_from_slice(&(p.value.cols as u64).to_le_bytes());
        for x in &p.value.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    put_str(&mut out, config);
    out.extend_from_slice(&Sha256::digest(config.as_bytes()));
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], AutodiffError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| AutodiffError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, AutodiffError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, AutodiffError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, AutodiffError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| AutodiffError::Checkpoint(e.to_string()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ParamStore, String), AutodiffError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(AutodiffError::Checkpoint("bad magic".into()));
    }
    let count = r.u32()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name = r.string()?;
        let group = r.string()?;
        let rank = r.u32()?;
        let dims: Vec<usize> = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<_, _>>()?;
        let (rows, cols) = match dims.as_slice() {
            [n] => (1, *n),
            [a, b] => (*a, *b),
            _ => return Err(AutodiffError::Checkpoint(format!("unsupported rank {rank} for `{name}`"))),
        };
        let raw = r.take(rows * cols * 8)?;
        let data: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if store.id(&name).is_some() {
            return Err(AutodiffError::Checkpoint(format!("duplicate parameter `{name}`")));
        }
        store.insert(&name, &group, Tensor { rows, cols, data });
    }
    let config = r.string()?;
    let digest = r.take(32)?;
    if digest != Sha256::digest(config.as_bytes()).as_slice() {
        return Err(AutodiffError::Checkpoint("config digest mismatch".into()));
    }
    if r.pos != bytes.len() {
        return Err(AutodiffError::Checkpoint("trailing bytes".into()));
    }
    Ok((store, config))
}

pub fn save_checkpoint(path: impl AsRef<Path>, store: &ParamStore, config: &str) -> Result<(), AutodiffError> {
    fs::write(path.as_ref(), encode_checkpoint(store, config)).map_err(|e| AutodiffError::Io(e.to_string()))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ParamStore, String), AutodiffError> {
    let bytes = fs::read(path.as_ref()).map_err(|e| AutodiffError::Io(e.to_string()))?;
    decode_checkpoint(&bytes)
}
