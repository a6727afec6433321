//! Heterogeneous molecular graphs: typed nodes and directed typed edges in
//! three views (molecule, element, drug), with text serialization.

mod build;
mod pe;

pub use build::{
    build_drug_view, build_element_view, build_molecule_view, ElementKnowledge, MoleculeViews, ViewBuilder,
    DNODE_FEATURE_WIDTH, KNOWLEDGE_NODE_FEATURE_WIDTH,
};
pub use pe::{laplacian_pe, laplacian_pe_graph, DEFAULT_PE_DIM};

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::chem::{ChemError, ATOM_FEATURE_WIDTH, BOND_FEATURE_WIDTH};
use crate::kg::{KgError, HOP_FEATURE_WIDTH};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HmgError {
    #[error("fragments do not partition the {atoms} atoms of the molecule")]
    PartitionMismatch { atoms: usize },
    #[error("entity `{0}` has no embedding")]
    UnknownEntityAtLookup(String),
    #[error("expected a molecule view, got {0}")]
    NotMoleculeView(View),
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error(transparent)]
    Kg(#[from] KgError),
}

macro_rules! named_enum {
    ($name:ident { $($variant:ident),* $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),* }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),*];
            pub const COUNT: usize = [$(stringify!($variant)),*].len();

            pub fn index(self) -> usize {
                self as usize
            }

            pub fn name(self) -> &'static str {
                match self { $($name::$variant => stringify!($variant)),* }
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $(stringify!($variant) => Ok($name::$variant),)*
                    _ => Err(format!("unknown {} `{s}`", stringify!($name))),
                }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named_enum!(NodeType { Atom, Fragment, Element, FunctionalGroup, DNode });
named_enum!(EdgeType { Bond, Reaction, Join, AE, FrFu, EE, FuFu, EFu, AD, FrD });
named_enum!(View { M, EM, DM });

impl NodeType {
    pub fn is_scaffold(self) -> bool {
        matches!(self, NodeType::Atom | NodeType::Fragment)
    }
}

impl EdgeType {
    pub fn allows_parallel(self) -> bool {
        matches!(self, EdgeType::EE | EdgeType::FuFu | EdgeType::EFu)
    }
}

/// Feature width of every node and edge type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDims {
    pub node: [usize; NodeType::COUNT],
    pub edge: [usize; EdgeType::COUNT],
}

impl TypeDims {
    /// Widths produced by the builders in this module for a rule table of
    /// `rule_count` entries.
    pub fn standard(rule_count: usize) -> Self {
        TypeDims {
            node: [
                ATOM_FEATURE_WIDTH,
                ATOM_FEATURE_WIDTH + 1,
                KNOWLEDGE_NODE_FEATURE_WIDTH,
                KNOWLEDGE_NODE_FEATURE_WIDTH,
                DNODE_FEATURE_WIDTH,
            ],
            edge: [
                BOND_FEATURE_WIDTH,
                rule_count.max(1),
                1,
                1,
                1,
                HOP_FEATURE_WIDTH,
                HOP_FEATURE_WIDTH,
                HOP_FEATURE_WIDTH,
                1,
                1,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeType,
    pub features: Vec<f64>,
    pub pe: Vec<f64>,
    /// Display name (element symbol, group name, drug id, ...).
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub kind: EdgeType,
    pub features: Vec<f64>,
    /// Index of the opposite-direction edge.
    pub reverse: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hmg {
    pub view: View,
    pub drug_id: Option<String>,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl Hmg {
    pub fn new(view: View) -> Self {
        Hmg { view, drug_id: None, nodes: Vec::new(), edges: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn pe_dim(&self) -> usize {
        self.nodes.first().map_or(0, |n| n.pe.len())
    }

    pub(crate) fn push_node(&mut self, kind: NodeType, features: Vec<f64>, pe: Vec<f64>, label: impl Into<String>) -> usize {
        let label: String = label.into();
        let label = label.split_whitespace().collect::<Vec<_>>().join("_");
        self.nodes.push(Node { kind, features, pe, label });
        self.nodes.len() - 1
    }

    /// Add `a -> b` and `b -> a` with the same features.
    pub(crate) fn push_pair(&mut self, a: usize, b: usize, kind: EdgeType, features: Vec<f64>) {
        let i = self.edges.len();
        self.edges.push(Edge { source: a, target: b, kind, features: features.clone(), reverse: i + 1 });
        self.edges.push(Edge { source: b, target: a, kind, features, reverse: i });
    }

    pub fn count_nodes(&self, kind: NodeType) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn count_edges(&self, kind: EdgeType) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    /// Indices of edges whose target is each node, in edge order.
    pub fn incoming(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            inc[e.target].push(i);
        }
        inc
    }

    /// Relabel nodes and edges: `node_perm[old] = new`, `edge_perm[old] = new`.
    pub fn permuted(&self, node_perm: &[usize], edge_perm: &[usize]) -> Hmg {
        let mut nodes = self.nodes.clone();
        for (old, n) in self.nodes.iter().enumerate() {
            nodes[node_perm[old]] = n.clone();
        }
        let mut edges = self.edges.clone();
        for (old, e) in self.edges.iter().enumerate() {
            edges[edge_perm[old]] = Edge {
                source: node_perm[e.source],
                target: node_perm[e.target],
                kind: e.kind,
                features: e.features.clone(),
                reverse: edge_perm[e.reverse],
            };
        }
        Hmg { view: self.view, drug_id: self.drug_id.clone(), nodes, edges }
    }

    /// Check structural invariants; with `dims`, also per-type feature widths.
    pub fn validate(&self, dims: Option<&TypeDims>) -> Result<(), HmgError> {
        let bad = |m: String| Err(HmgError::Invalid(m));
        let n = self.nodes.len();
        let k = self.pe_dim();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.pe.len() != k {
                return bad(format!("node {i} has positional width {}, expected {k}", node.pe.len()));
            }
            if !node.kind.is_scaffold() && node.pe.iter().any(|&x| x != 0.0) {
                return bad(format!("knowledge node {i} has a nonzero positional vector"));
            }
            if node.features.iter().chain(&node.pe).any(|x| !x.is_finite()) {
                return bad(format!("node {i} has a non-finite value"));
            }
            if let Some(d) = dims {
                if node.features.len() != d.node[node.kind.index()] {
                    return bad(format!("node {i} ({}) has width {}", node.kind, node.features.len()));
                }
            }
        }
        let mut seen = HashSet::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.source >= n || e.target >= n || e.reverse >= self.edges.len() {
                return bad(format!("edge {i} has an index out of range"));
            }
            if e.source == e.target {
                return bad(format!("edge {i} is a self loop"));
            }
            let r = &self.edges[e.reverse];
            if r.source != e.target || r.target != e.source || r.reverse != i || r.kind != e.kind || e.reverse == i {
                return bad(format!("edge {i} lacks a mutual reverse edge"));
            }
            if !e.kind.allows_parallel() && !seen.insert((e.source, e.target, e.kind)) {
                return bad(format!("edge {i} duplicates a {} edge", e.kind));
            }
            if e.features.iter().any(|x| !x.is_finite()) {
                return bad(format!("edge {i} has a non-finite value"));
            }
            if let Some(d) = dims {
                if e.features.len() != d.edge[e.kind.index()] {
                    return bad(format!("edge {i} ({}) has width {}", e.kind, e.features.len()));
                }
            }
        }
        let dnodes: Vec<usize> = (0..n).filter(|&i| self.nodes[i].kind == NodeType::DNode).collect();
        match self.view {
            View::DM => {
                if dnodes.len() != 1 {
                    return bad(format!("drug view has {} drug nodes", dnodes.len()));
                }
                let d = dnodes[0];
                for (i, node) in self.nodes.iter().enumerate() {
                    let want = match node.kind {
                        NodeType::Atom => EdgeType::AD,
                        NodeType::Fragment => EdgeType::FrD,
                        _ => continue,
                    };
                    if !self.edges.iter().any(|e| e.source == i && e.target == d && e.kind == want) {
                        return bad(format!("node {i} is not linked to the drug node"));
                    }
                }
            }
            _ if !dnodes.is_empty() => return bad("drug node outside the drug view".into()),
            _ => {}
        }
        Ok(())
    }

    /// `HMG v1` text form.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        writeln!(out, "HMG v1 view={} drug={}", self.view, self.drug_id.as_deref().unwrap_or("-")).unwrap();
        for n in &self.nodes {
            writeln!(out, "N {} {} {} {}", n.kind, csv(&n.features), csv(&n.pe), n.label).unwrap();
        }
        for e in &self.edges {
            writeln!(out, "E {} {} {} {} {}", e.source, e.target, e.kind, e.reverse, csv(&e.features)).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Hmg, HmgError> {
        let err = |line: usize, reason: String| HmgError::Parse { line, reason };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty input".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "HMG" || h[1] != "v1" {
            return Err(err(1, format!("bad header `{header}`")));
        }
        let view = h[2].strip_prefix("view=").and_then(|v| v.parse::<View>().ok()).ok_or_else(|| err(1, "bad view".into()))?;
        let drug = h[3].strip_prefix("drug=").ok_or_else(|| err(1, "bad drug field".into()))?;
        let mut g = Hmg::new(view);
        g.drug_id = (drug != "-").then(|| drug.to_string());
        for (i, line) in lines {
            let ln = i + 1;
            let t: Vec<&str> = line.split_whitespace().collect();
            match t.first() {
                Some(&"N") if t.len() == 5 || t.len() == 4 => {
                    let kind = t[1].parse::<NodeType>().map_err(|e| err(ln, e))?;
                    let features = parse_csv(t[2]).map_err(|e| err(ln, e))?;
                    let pe = parse_csv(t[3]).map_err(|e| err(ln, e))?;
                    let label = t.get(4).copied().unwrap_or("").to_string();
                    g.nodes.push(Node { kind, features, pe, label });
                }
                Some(&"E") if t.len() == 6 => {
                    let idx = |s: &str| s.parse::<usize>().map_err(|e| err(ln, e.to_string()));
                    g.edges.push(Edge {
                        source: idx(t[1])?,
                        target: idx(t[2])?,
                        kind: t[3].parse::<EdgeType>().map_err(|e| err(ln, e))?,
                        reverse: idx(t[4])?,
                        features: parse_csv(t[5]).map_err(|e| err(ln, e))?,
                    });
                }
                _ => return Err(err(ln, format!("unrecognized record `{line}`"))),
            }
        }
        g.validate(None)?;
        Ok(g)
    }
}

fn csv(v: &[f64]) -> String {
    if v.is_empty() {
        return "-".into();
    }
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_csv(s: &str) -> Result<Vec<f64>, String> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| x.parse::<f64>().map_err(|e| format!("`{x}`: {e}"))).collect()
}
