//! Typed graph transformer over HMGs: per-type input projections, layers
//! of synchronous node/edge attention, and score-gated top-k readout.

mod dump;
mod forward;

pub use dump::{AttentionDump, PoolRecord, ReceiverRecord};
pub use forward::{attention_weights, sag_pool, EncodeOutput, GraphInputs, LayerAttention};

use thiserror::Error;

use crate::autodiff::{AutodiffError, ParamStore};
use crate::hmg::{EdgeType, NodeType, TypeDims};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncoderError {
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error("{kind} features have width {found}, expected {expected}")]
    DimMismatchPerType { kind: String, expected: usize, found: usize },
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub d: usize,
    pub layers: usize,
    pub heads: usize,
    pub k_pe: usize,
    pub leaky_slope: f64,
    pub pool_ratio: f64,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { d: 64, layers: 3, heads: 4, k_pe: 8, leaky_slope: 0.01, pool_ratio: 0.5, seed: 0 }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: &str| Err(EncoderError::Config(m.to_string()));
        if self.heads == 0 || self.layers == 0 || self.d == 0 {
            return bad("d, layers and heads must be positive");
        }
        if self.d % self.heads != 0 {
            return bad("d must be divisible by heads");
        }
        if !(self.pool_ratio > 0.0 && self.pool_ratio <= 1.0) {
            return bad("pool_ratio must lie in (0, 1]");
        }
        if self.k_pe == 0 {
            return bad("k_pe must be at least 1");
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d / self.heads
    }
}

/// Parameter names. Head `k` of a per-layer projection occupies column
/// block `k` of the `d x d` matrix.
pub mod names {
    use super::{EdgeType, NodeType};

    pub fn node_in(t: NodeType) -> String {
        format!("enc.A.{t}")
    }
    pub fn edge_in(t: EdgeType) -> String {
        format!("enc.B.{t}")
    }
    pub const NODE_BIAS: &str = "enc.a0";
    pub const EDGE_BIAS: &str = "enc.b0";
    pub const PE_PROJ: &str = "enc.C0";
    pub const PE_BIAS: &str = "enc.c0";
    pub fn wq(l: usize) -> String {
        format!("enc.Wq.{l}")
    }
    pub fn wk(l: usize) -> String {
        format!("enc.Wk.{l}")
    }
    pub fn wv(l: usize) -> String {
        format!("enc.Wv.{l}")
    }
    pub fn node_type_map(t: NodeType) -> String {
        format!("enc.Wt.node.{t}")
    }
    pub fn edge_type_map(t: EdgeType) -> String {
        format!("enc.Wt.edge.{t}")
    }
    pub fn node_out(l: usize) -> String {
        format!("enc.Wout.node.{l}")
    }
    pub fn edge_out(l: usize) -> String {
        format!("enc.Wout.edge.{l}")
    }
    pub fn node_update(l: usize, t: NodeType) -> String {
        format!("enc.U.node.{l}.{t}")
    }
    pub fn edge_update(l: usize, t: EdgeType) -> String {
        format!("enc.U.edge.{l}.{t}")
    }
    pub const POOL_W: &str = "enc.pool.w";
    pub const POOL_B: &str = "enc.pool.b";
}

/// Architecture description; parameters live in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub dims: TypeDims,
}

impl Encoder {
    pub fn new(config: EncoderConfig, dims: TypeDims) -> Result<Self, EncoderError> {
        config.validate()?;
        Ok(Encoder { config, dims })
    }

    /// Insert every encoder parameter, uniform in `[-1/sqrt(d), 1/sqrt(d)]`.
    pub fn init_params(&self, store: &mut ParamStore) {
        let c = &self.config;
        let (d, dk) = (c.d, c.head_dim());
        let bound = 1.0 / (d as f64).sqrt();
        let mut add = |name: String, group: &str, rows: usize, cols: usize| {
            store.insert_uniform(&name, group, rows, cols, bound, c.seed);
        };
        for &t in NodeType::ALL {
            add(names::node_in(t), "init.node", self.dims.node[t.index()], d);
        }
        for &t in EdgeType::ALL {
            add(names::edge_in(t), "init.edge", self.dims.edge[t.index()], d);
        }
        add(names::NODE_BIAS.into(), "init.bias", 1, d);
        add(names::EDGE_BIAS.into(), "init.bias", 1, d);
        add(names::PE_PROJ.into(), "init.pe", c.k_pe, d);
        add(names::PE_BIAS.into(), "init.pe", 1, d);
        for l in 0..c.layers {
            add(names::wq(l), "attn.qkv", d, d);
            add(names::wk(l), "attn.qkv", d, d);
            add(names::wv(l), "attn.qkv", d, d);
        }
        for &t in NodeType::ALL {
            add(names::node_type_map(t), "attn.type", dk, dk);
        }
        for &t in EdgeType::ALL {
            add(names::edge_type_map(t), "attn.type", dk, dk);
        }
        for l in 0..c.layers {
            add(names::node_out(l), "attn.out", d, d);
            add(names::edge_out(l), "attn.out", d, d);
            for &t in NodeType::ALL {
                add(names::node_update(l, t), "update", 2 * d, d);
            }
            for &t in EdgeType::ALL {
                add(names::edge_update(l, t), "update", 2 * d, d);
            }
        }
        add(names::POOL_W.into(), "pool", d, 1);
        add(names::POOL_B.into(), "pool", 1, 1);
    }
}
