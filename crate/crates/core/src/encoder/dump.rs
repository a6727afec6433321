use serde::{Deserialize, Serialize};

use super::{Encoder, EncoderError, GraphInputs};
use crate::autodiff::{ParamStore, Tape};
use crate::hmg::{Hmg, NodeType};

/// Final-layer attention over one receiver's senders. Sender ids are
/// `n<i>` for nodes and `e<i>` for edges; `weights[k]` is head `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverRecord {
    pub view: String,
    pub layer: usize,
    pub receiver_kind: String,
    pub receiver_type: String,
    pub receiver_id: usize,
    pub sender_ids: Vec<String>,
    pub weights: Vec<Vec<f64>>,
}

/// Readout score of one node, softmax-normalised among nodes of its type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub view: String,
    pub node_id: usize,
    pub node_type: String,
    pub label: String,
    pub pool_score: f64,
    pub pool_score_normalized_by_type: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttentionDump {
    pub receivers: Vec<ReceiverRecord>,
    pub pool: Vec<PoolRecord>,
}

impl AttentionDump {
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.receivers {
            out.push_str(&serde_json::to_string(r).expect("plain record"));
            out.push('\n');
        }
        for p in &self.pool {
            out.push_str(&serde_json::to_string(p).expect("plain record"));
            out.push('\n');
        }
        out
    }
}

fn softmax_by_type(kinds: &[NodeType], scores: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; scores.len()];
    for &t in NodeType::ALL {
        let idx: Vec<usize> = (0..kinds.len()).filter(|&i| kinds[i] == t).collect();
        let Some(max) = idx.iter().map(|&i| scores[i]).max_by(f64::total_cmp) else {
            continue;
        };
        let z: f64 = idx.iter().map(|&i| (scores[i] - max).exp()).sum();
        for &i in &idx {
            out[i] = (scores[i] - max).exp() / z;
        }
    }
    out
}

impl Encoder {
    /// Encode `hmg` and collect its final-layer attention and pooling scores.
    pub fn encode_with_dump(&self, store: &ParamStore, hmg: &Hmg) -> Result<(Vec<f64>, AttentionDump), EncoderError> {
        let g = GraphInputs::new(hmg, self)?;
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, store, &g)?;
        let view = g.view.to_string();
        let layer = self.config.layers - 1;
        let att = out.attention[layer];
        let heads = self.config.heads;
        let mut receivers = Vec::new();

        let wn = tape.value(att.node);
        for (v, senders) in g.node_senders().into_iter().enumerate() {
            if senders.is_empty() {
                continue;
            }
            let weights = (0..heads).map(|k| senders.iter().map(|&e| wn.get(e, k)).collect()).collect();
            receivers.push(ReceiverRecord {
                view: view.clone(),
                layer,
                receiver_kind: "node".into(),
                receiver_type: g.node_kinds[v].to_string(),
                receiver_id: v,
                sender_ids: senders.iter().map(|e| format!("e{e}")).collect(),
                weights,
            });
        }

        let we = tape.value(att.edge);
        let mut per_edge: Vec<Vec<(usize, usize)>> = vec![Vec::new(); g.edges];
        for (p, (e, s)) in g.edge_pairs().enumerate() {
            per_edge[e].push((p, s));
        }
        for (e, pairs) in per_edge.into_iter().enumerate() {
            let sender_ids = pairs
                .iter()
                .map(|&(_, s)| if s < g.nodes { format!("n{s}") } else { format!("e{}", s - g.nodes) })
                .collect();
            let weights = (0..heads).map(|k| pairs.iter().map(|&(p, _)| we.get(p, k)).collect()).collect();
            receivers.push(ReceiverRecord {
                view: view.clone(),
                layer,
                receiver_kind: "edge".into(),
                receiver_type: g.edge_kinds[e].to_string(),
                receiver_id: e,
                sender_ids,
                weights,
            });
        }

        let scores: Vec<f64> = tape.value(out.pool_scores).data[..g.nodes].to_vec();
        let norm = softmax_by_type(&g.node_kinds, &scores);
        let pool = (0..g.nodes)
            .map(|v| PoolRecord {
                view: view.clone(),
                node_id: v,
                node_type: g.node_kinds[v].to_string(),
                label: g.labels[v].clone(),
                pool_score: scores[v],
                pool_score_normalized_by_type: norm[v],
            })
            .collect();
        Ok((tape.value(out.graph).data.clone(), AttentionDump { receivers, pool }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_softmax_single_and_uniform() {
        let kinds = [NodeType::Atom, NodeType::Fragment, NodeType::Atom];
        let n = softmax_by_type(&kinds, &[0.3, -4.0, 0.3]);
        assert_eq!(n, vec![0.5, 1.0, 0.5]);
    }
}
