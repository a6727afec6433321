use std::rc::Rc;

use super::{names, Encoder, EncoderError};
use crate::autodiff::{AutodiffError, ParamStore, Tape, Tensor, Var};
use crate::hmg::{EdgeType, Hmg, NodeType, View};
use crate::rng::fnv1a;

/// Items of one type: their positions in the graph and stacked features.
#[derive(Debug, Clone)]
struct TypeGroup<T> {
    kind: T,
    idx: Rc<Vec<usize>>,
    features: Tensor,
}

/// Index structures derived once per graph and reused across forward passes.
#[derive(Debug, Clone)]
pub struct GraphInputs {
    pub view: View,
    pub nodes: usize,
    pub edges: usize,
    node_groups: Vec<TypeGroup<NodeType>>,
    edge_groups: Vec<TypeGroup<EdgeType>>,
    /// Row of each node in the type-grouped stacking.
    node_inv: Rc<Vec<usize>>,
    edge_inv: Rc<Vec<usize>>,
    pe: Tensor,
    source: Rc<Vec<usize>>,
    target: Rc<Vec<usize>>,
    /// Edge-aggregation pairs: receiving edge, and sender as an index into
    /// the stacked `[nodes; edges]` pool.
    edge_recv: Rc<Vec<usize>>,
    edge_send: Rc<Vec<usize>>,
    pub node_kinds: Vec<NodeType>,
    pub edge_kinds: Vec<EdgeType>,
    pub labels: Vec<String>,
}

fn grouped<T: Copy + PartialEq>(
    all: &[T],
    kinds: &[T],
    feats: &[&[f64]],
    width: impl Fn(T) -> usize,
    name: impl Fn(T) -> String,
) -> Result<(Vec<TypeGroup<T>>, Vec<usize>), EncoderError> {
    let mut groups = Vec::new();
    let mut inv = vec![0; kinds.len()];
    let mut row = 0;
    for &t in all {
        let idx: Vec<usize> = (0..kinds.len()).filter(|&i| kinds[i] == t).collect();
        if idx.is_empty() {
            continue;
        }
        let w = width(t);
        let mut data = Vec::with_capacity(idx.len() * w);
        for &i in &idx {
            if feats[i].len() != w {
                return Err(EncoderError::DimMismatchPerType { kind: name(t), expected: w, found: feats[i].len() });
            }
            data.extend_from_slice(feats[i]);
            inv[i] = row;
            row += 1;
        }
        let features = Tensor::from_vec(idx.len(), w, data)?;
        groups.push(TypeGroup { kind: t, idx: Rc::new(idx), features });
    }
    Ok((groups, inv))
}

impl GraphInputs {
    pub fn new(hmg: &Hmg, enc: &Encoder) -> Result<Self, EncoderError> {
        let n = hmg.node_count();
        if n == 0 {
            return Err(EncoderError::EmptyGraph);
        }
        let k = enc.config.k_pe;
        let node_kinds: Vec<NodeType> = hmg.nodes.iter().map(|v| v.kind).collect();
        let edge_kinds: Vec<EdgeType> = hmg.edges.iter().map(|e| e.kind).collect();
        let nf: Vec<&[f64]> = hmg.nodes.iter().map(|v| v.features.as_slice()).collect();
        let ef: Vec<&[f64]> = hmg.edges.iter().map(|e| e.features.as_slice()).collect();
        let (node_groups, node_inv) =
            grouped(NodeType::ALL, &node_kinds, &nf, |t| enc.dims.node[t.index()], |t| t.to_string())?;
        let (edge_groups, edge_inv) =
            grouped(EdgeType::ALL, &edge_kinds, &ef, |t| enc.dims.edge[t.index()], |t| t.to_string())?;

        let mut pe = Vec::with_capacity(n * k);
        for v in &hmg.nodes {
            if v.pe.len() != k {
                return Err(EncoderError::DimMismatchPerType { kind: "PE".into(), expected: k, found: v.pe.len() });
            }
            pe.extend_from_slice(&v.pe);
        }

        let incoming = hmg.incoming();
        let (mut edge_recv, mut edge_send) = (Vec::new(), Vec::new());
        for (ei, e) in hmg.edges.iter().enumerate() {
            edge_recv.push(ei);
            edge_send.push(e.source);
            for &p in &incoming[e.source] {
                edge_recv.push(ei);
                edge_send.push(n + p);
            }
        }
        Ok(GraphInputs {
            view: hmg.view,
            nodes: n,
            edges: hmg.edge_count(),
            node_groups,
            edge_groups,
            node_inv: Rc::new(node_inv),
            edge_inv: Rc::new(edge_inv),
            pe: Tensor::from_vec(n, k, pe)?,
            source: Rc::new(hmg.edges.iter().map(|e| e.source).collect()),
            target: Rc::new(hmg.edges.iter().map(|e| e.target).collect()),
            edge_recv: Rc::new(edge_recv),
            edge_send: Rc::new(edge_send),
            node_kinds,
            edge_kinds,
            labels: hmg.nodes.iter().map(|v| v.label.clone()).collect(),
        })
    }

    /// Senders of each node receiver (incoming edge ids, in edge order).
    pub fn node_senders(&self) -> Vec<Vec<usize>> {
        let mut s = vec![Vec::new(); self.nodes];
        for (e, &t) in self.target.iter().enumerate() {
            s[t].push(e);
        }
        s
    }

    /// Edge-aggregation pairs `(receiver edge, pool index)`; pool indices
    /// below `nodes` are nodes, the rest are `nodes + edge`.
    pub fn edge_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edge_recv.iter().copied().zip(self.edge_send.iter().copied())
    }
}

/// Final-layer attention and pooling values kept for export.
#[derive(Debug, Clone, Copy)]
pub struct LayerAttention {
    /// `E x K`: weight of each edge on its target node, per head.
    pub node: Var,
    /// `P x K` over [`GraphInputs::edge_pairs`].
    pub edge: Var,
}

#[derive(Debug, Clone)]
pub struct EncodeOutput {
    /// `1 x d` graph embedding.
    pub graph: Var,
    pub node_h: Var,
    pub edge_h: Var,
    pub attention: Vec<LayerAttention>,
    /// `(n + E) x 1` pooling scores over `[nodes; edges]`.
    pub pool_scores: Var,
    /// Pool indices that survived top-k, in pooling order.
    pub kept: Vec<usize>,
}

/// Per-head scaled dot products `q_p . k_p / sqrt(d/K)` normalised over
/// pairs sharing a receiver. Inputs are `P x d`; output is `P x K`.
pub fn attention_weights(
    tape: &mut Tape,
    q: Var,
    k: Var,
    recv: Rc<Vec<usize>>,
    receivers: usize,
    heads: usize,
) -> Result<Var, AutodiffError> {
    let (p, d) = tape.value(q).shape();
    let dk = d / heads;
    let prod = tape.mul(q, k)?;
    let split = tape.reshape(prod, p * heads, dk)?;
    let dots = tape.sum_cols(split)?;
    let logits = tape.reshape(dots, p, heads)?;
    let logits = tape.scale(logits, 1.0 / (dk as f64).sqrt())?;
    tape.segment_softmax(logits, recv, receivers)
}

/// `sum_p w[p, k] * v[p, head k]` per receiver; receivers with no pairs get zeros.
fn weighted_sum(
    tape: &mut Tape,
    v: Var,
    w: Var,
    recv: Rc<Vec<usize>>,
    receivers: usize,
    heads: usize,
) -> Result<Var, AutodiffError> {
    let (p, d) = tape.value(v).shape();
    let dk = d / heads;
    let vs = tape.reshape(v, p * heads, dk)?;
    let ws = tape.reshape(w, p * heads, 1)?;
    let prod = tape.mul_col(vs, ws)?;
    let back = tape.reshape(prod, p, d)?;
    tape.segment_sum(back, recv, receivers)
}

/// Score-gated top-k readout over `items` (`count x d`). Returns the
/// `1 x d` summary, the scores and the kept indices.
pub fn sag_pool(
    tape: &mut Tape,
    items: Var,
    w: Var,
    b: Var,
    ratio: f64,
) -> Result<(Var, Var, Vec<usize>), AutodiffError> {
    let s = tape.matmul(items, w)?;
    let scores = tape.add_row(s, b)?;
    let count = tape.value(items).rows;
    let keep = ((ratio * count as f64).ceil() as usize).clamp(1, count);
    let vals = tape.value(scores).data.clone();
    let emb = tape.value(items);
    let hashes: Vec<u64> = (0..count)
        .map(|i| {
            let bytes: Vec<u8> = emb.row(i).iter().flat_map(|x| x.to_le_bytes()).collect();
            fnv1a(&bytes)
        })
        .collect();
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &c| vals[c].total_cmp(&vals[a]).then(hashes[a].cmp(&hashes[c])));
    order.truncate(keep);
    let idx = Rc::new(order.clone());
    let kept = tape.gather_rows(items, idx.clone())?;
    let ks = tape.gather_rows(scores, idx)?;
    let gate = tape.tanh(ks)?;
    let gated = tape.mul_col(kept, gate)?;
    let out = tape.sum_rows(gated)?;
    Ok((out, scores, order))
}

impl Encoder {
    /// Apply a per-type map to row groups of `x`, restoring graph order.
    fn per_type<T: Copy>(
        &self,
        tape: &mut Tape,
        x: Var,
        groups: &[TypeGroup<T>],
        inv: &Rc<Vec<usize>>,
        block: usize,
        mut weight: impl FnMut(&mut Tape, T) -> Var,
    ) -> Result<Var, AutodiffError> {
        if groups.is_empty() {
            return Ok(x);
        }
        let cols = tape.value(x).cols;
        let mut parts = Vec::with_capacity(groups.len());
        for g in groups {
            let rows = g.idx.len();
            let sub = tape.gather_rows(x, g.idx.clone())?;
            let split = tape.reshape(sub, rows * cols / block, block)?;
            let w = weight(tape, g.kind);
            let mapped = tape.matmul(split, w)?;
            let out_cols = tape.value(mapped).cols * cols / block;
            parts.push(tape.reshape(mapped, rows, out_cols)?);
        }
        let stacked = tape.concat_rows(&parts)?;
        tape.gather_rows(stacked, inv.clone())
    }

    /// Initial node and edge embeddings.
    pub fn init_embeddings(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        g: &GraphInputs,
    ) -> Result<(Var, Var), AutodiffError> {
        let mut parts = Vec::new();
        for grp in &g.node_groups {
            let x = tape.constant(grp.features.clone())?;
            let a = tape.param_named(store, &names::node_in(grp.kind));
            parts.push(tape.matmul(x, a)?);
        }
        let stacked = tape.concat_rows(&parts)?;
        let typed = tape.gather_rows(stacked, g.node_inv.clone())?;
        let a0 = tape.param_named(store, names::NODE_BIAS);
        let pe = tape.constant(g.pe.clone())?;
        let c0 = tape.param_named(store, names::PE_PROJ);
        let c0b = tape.param_named(store, names::PE_BIAS);
        let pe_part = tape.linear(pe, c0, c0b)?;
        let hv = tape.add_row(typed, a0)?;
        let hv = tape.add(hv, pe_part)?;

        let he = if g.edges == 0 {
            tape.constant(Tensor::zeros(0, self.config.d))?
        } else {
            let mut parts = Vec::new();
            for grp in &g.edge_groups {
                let y = tape.constant(grp.features.clone())?;
                let b = tape.param_named(store, &names::edge_in(grp.kind));
                parts.push(tape.matmul(y, b)?);
            }
            let stacked = tape.concat_rows(&parts)?;
            let typed = tape.gather_rows(stacked, g.edge_inv.clone())?;
            let b0 = tape.param_named(store, names::EDGE_BIAS);
            let src = tape.gather_rows(hv, g.source.clone())?;
            let he = tape.add_row(typed, b0)?;
            tape.add(he, src)?
        };
        Ok((hv, he))
    }

    /// Queries, keys and values for nodes or edges at layer `l`: the head
    /// projections followed by the per-type map on each head block.
    fn qkv<T: Copy>(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        h: Var,
        l: usize,
        groups: &[TypeGroup<T>],
        inv: &Rc<Vec<usize>>,
        type_map: impl Fn(T) -> String,
    ) -> Result<(Var, Var, Var), AutodiffError> {
        let d = self.config.d;
        let wq = tape.param_named(store, &names::wq(l));
        let wk = tape.param_named(store, &names::wk(l));
        let wv = tape.param_named(store, &names::wv(l));
        let w = tape.concat_cols(&[wq, wk, wv])?;
        let proj = tape.matmul(h, w)?;
        let typed = self.per_type(tape, proj, groups, inv, self.config.head_dim(), |t, k| {
            t.param_named(store, &type_map(k))
        })?;
        Ok((tape.slice_cols(typed, 0, d)?, tape.slice_cols(typed, d, 2 * d)?, tape.slice_cols(typed, 2 * d, 3 * d)?))
    }

    /// Public single-head-set projection, for checking against direct products.
    pub fn qkv_project_nodes(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        g: &GraphInputs,
        h: Var,
        l: usize,
    ) -> Result<(Var, Var, Var), AutodiffError> {
        self.qkv(tape, store, h, l, &g.node_groups, &g.node_inv, names::node_type_map)
    }

    pub fn qkv_project_edges(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        g: &GraphInputs,
        h: Var,
        l: usize,
    ) -> Result<(Var, Var, Var), AutodiffError> {
        self.qkv(tape, store, h, l, &g.edge_groups, &g.edge_inv, names::edge_type_map)
    }

    /// One synchronous layer: every message reads only the inputs `hv`, `he`.
    pub fn layer(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        g: &GraphInputs,
        hv: Var,
        he: Var,
        l: usize,
    ) -> Result<(Var, Var, LayerAttention), AutodiffError> {
        let heads = self.config.heads;
        let (qn, kn, vn) = self.qkv_project_nodes(tape, store, g, hv, l)?;
        let (qe, ke, ve) = self.qkv_project_edges(tape, store, g, he, l)?;

        // nodes receive from incoming edges
        let q_recv = tape.gather_rows(qn, g.target.clone())?;
        let wn = attention_weights(tape, q_recv, ke, g.target.clone(), g.nodes, heads)?;
        let mv = weighted_sum(tape, ve, wn, g.target.clone(), g.nodes, heads)?;
        let wout = tape.param_named(store, &names::node_out(l));
        let mv = tape.matmul(mv, wout)?;

        // edges receive from their source node and the edges entering it
        let kpool = tape.concat_rows(&[kn, ke])?;
        let vpool = tape.concat_rows(&[vn, ve])?;
        let q_recv = tape.gather_rows(qe, g.edge_recv.clone())?;
        let k_send = tape.gather_rows(kpool, g.edge_send.clone())?;
        let v_send = tape.gather_rows(vpool, g.edge_send.clone())?;
        let we = attention_weights(tape, q_recv, k_send, g.edge_recv.clone(), g.edges, heads)?;
        let me = weighted_sum(tape, v_send, we, g.edge_recv.clone(), g.edges, heads)?;
        let wout = tape.param_named(store, &names::edge_out(l));
        let me = tape.matmul(me, wout)?;

        let slope = self.config.leaky_slope;
        let d2 = 2 * self.config.d;
        let cat = tape.concat_cols(&[hv, mv])?;
        let pre = self.per_type(tape, cat, &g.node_groups, &g.node_inv, d2, |t, k| {
            t.param_named(store, &names::node_update(l, k))
        })?;
        let hv_next = tape.leaky_relu(pre, slope)?;
        let cat = tape.concat_cols(&[he, me])?;
        let pre = self.per_type(tape, cat, &g.edge_groups, &g.edge_inv, d2, |t, k| {
            t.param_named(store, &names::edge_update(l, k))
        })?;
        let he_next = tape.leaky_relu(pre, slope)?;
        Ok((hv_next, he_next, LayerAttention { node: wn, edge: we }))
    }

    /// Full encoding of one graph onto `tape`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, g: &GraphInputs) -> Result<EncodeOutput, AutodiffError> {
        let (mut hv, mut he) = self.init_embeddings(tape, store, g)?;
        let mut attention = Vec::with_capacity(self.config.layers);
        for l in 0..self.config.layers {
            let (v, e, att) = self.layer(tape, store, g, hv, he, l)?;
            hv = v;
            he = e;
            attention.push(att);
        }
        let items = tape.concat_rows(&[hv, he])?;
        let w = tape.param_named(store, names::POOL_W);
        let b = tape.param_named(store, names::POOL_B);
        let (graph, pool_scores, kept) = sag_pool(tape, items, w, b, self.config.pool_ratio)?;
        Ok(EncodeOutput { graph, node_h: hv, edge_h: he, attention, pool_scores, kept })
    }

    /// Graph embedding without keeping the tape.
    pub fn encode(&self, store: &ParamStore, hmg: &Hmg) -> Result<Vec<f64>, EncoderError> {
        let g = GraphInputs::new(hmg, self)?;
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, store, &g)?;
        Ok(tape.value(out.graph).data.clone())
    }
}
