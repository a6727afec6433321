//! Whole-model checkpoints: parameters plus the `key=value` description
//! needed to rebuild the network around them.

use thiserror::Error;

use crate::autodiff::{decode_checkpoint, encode_checkpoint, AutodiffError, ParamStore};
use crate::config::{ConfigError, KeyValues};
use crate::encoder::{Encoder, EncoderConfig, EncoderError};
use crate::finetune::{DdiModel, DdiNet, MlpHead, PropertyModel, PropertyNet, TaskKind, DDI_HEAD, MP_HEAD};
use crate::hmg::{EdgeType, NodeType, TypeDims};
use crate::pretrain::{ContrastiveModel, Projector};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error("checkpoint holds a {found} model, expected {expected}")]
    WrongKind { expected: &'static str, found: String },
    #[error("checkpoint lacks parameter `{0}`")]
    MissingParameter(String),
}

#[derive(Debug, Clone)]
pub enum SavedModel {
    Contrastive(ContrastiveModel),
    Property(PropertyModel),
    Ddi(DdiModel),
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn split_widths<const N: usize>(kv: &KeyValues, key: &str) -> Result<[usize; N], ConfigError> {
    let text: String = kv.require(key)?;
    let bad = || ConfigError::BadValue { key: key.to_string(), value: text.clone() };
    let v: Vec<usize> = text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| bad())
}

pub fn encoder_to_kv(enc: &Encoder, kv: &mut KeyValues) {
    let c = &enc.config;
    kv.set("encoder.d", c.d);
    kv.set("encoder.layers", c.layers);
    kv.set("encoder.heads", c.heads);
    kv.set("encoder.k_pe", c.k_pe);
    kv.set("encoder.leaky_slope", c.leaky_slope);
    kv.set("encoder.pool_ratio", c.pool_ratio);
    kv.set("encoder.seed", c.seed);
    kv.set("encoder.dims.node", join(&enc.dims.node));
    kv.set("encoder.dims.edge", join(&enc.dims.edge));
}

pub fn encoder_from_kv(kv: &KeyValues) -> Result<Encoder, ModelError> {
    let config = EncoderConfig {
        d: kv.require("encoder.d")?,
        layers: kv.require("encoder.layers")?,
        heads: kv.require("encoder.heads")?,
        k_pe: kv.require("encoder.k_pe")?,
        leaky_slope: kv.require("encoder.leaky_slope")?,
        pool_ratio: kv.require("encoder.pool_ratio")?,
        seed: kv.require("encoder.seed")?,
    };
    let dims = TypeDims {
        node: split_widths::<{ NodeType::COUNT }>(kv, "encoder.dims.node")?,
        edge: split_widths::<{ EdgeType::COUNT }>(kv, "encoder.dims.edge")?,
    };
    Ok(Encoder::new(config, dims)?)
}

fn head_to_kv(h: &MlpHead, kv: &mut KeyValues) {
    kv.set("head.input", h.input);
    kv.set("head.hidden", h.hidden);
    kv.set("head.output", h.output);
    kv.set("head.slope", h.slope);
}

fn head_from_kv(kv: &KeyValues, prefix: &str) -> Result<MlpHead, ConfigError> {
    Ok(MlpHead {
        prefix: prefix.to_string(),
        input: kv.require("head.input")?,
        hidden: kv.require("head.hidden")?,
        output: kv.require("head.output")?,
        slope: kv.require("head.slope")?,
    })
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Contrastive(_) => "contrastive",
            SavedModel::Property(_) => "property",
            SavedModel::Ddi(_) => "ddi",
        }
    }

    pub fn encoder(&self) -> &Encoder {
        match self {
            SavedModel::Contrastive(m) => &m.encoder,
            SavedModel::Property(m) => &m.net.encoder,
            SavedModel::Ddi(m) => &m.net.encoder,
        }
    }

    pub fn params(&self) -> &ParamStore {
        match self {
            SavedModel::Contrastive(m) => &m.params,
            SavedModel::Property(m) => &m.params,
            SavedModel::Ddi(m) => &m.params,
        }
    }

    pub fn describe(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("model.kind", self.kind());
        encoder_to_kv(self.encoder(), &mut kv);
        match self {
            SavedModel::Contrastive(m) => kv.set("projector.dz", m.projector.dz),
            SavedModel::Property(m) => {
                head_to_kv(&m.net.head, &mut kv);
                kv.set("task.kind", serde_json::to_value(m.net.kind).expect("enum").as_str().expect("string"));
                for (k, (mu, sd)) in m.net.scale.iter().enumerate() {
                    kv.set(&format!("task.scale.{k}"), format!("{mu:e},{sd:e}"));
                }
            }
            SavedModel::Ddi(m) => {
                head_to_kv(&m.net.head, &mut kv);
                kv.set("ddi.symmetrize", m.net.symmetrize);
            }
        }
        kv
    }

    /// Checkpoint bytes; `extra` entries (run settings) are stored alongside
    /// the model description without overriding it.
    pub fn to_bytes(&self, extra: &KeyValues) -> Vec<u8> {
        let mut kv = extra.clone();
        kv.merge(&self.describe());
        encode_checkpoint(self.params(), &kv.to_text())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(SavedModel, KeyValues), ModelError> {
        let (params, text) = decode_checkpoint(bytes)?;
        let kv = KeyValues::parse(&text)?;
        let encoder = encoder_from_kv(&kv)?;
        let kind: String = kv.require("model.kind")?;
        let model = match kind.as_str() {
            "contrastive" => {
                let dz = kv.require("projector.dz")?;
                let projector = Projector { d: encoder.config.d, dz, slope: encoder.config.leaky_slope };
                SavedModel::Contrastive(ContrastiveModel { encoder, projector, params })
            }
            "property" => {
                let head = head_from_kv(&kv, MP_HEAD)?;
                let kind_text: String = kv.require("task.kind")?;
                let kind: TaskKind = serde_json::from_value(serde_json::Value::String(kind_text.clone()))
                    .map_err(|_| ConfigError::BadValue { key: "task.kind".into(), value: kind_text })?;
                let mut scale = Vec::with_capacity(head.output);
                for k in 0..head.output {
                    let key = format!("task.scale.{k}");
                    let text: String = kv.require(&key)?;
                    let parsed = text.split_once(',').and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)));
                    scale.push(parsed.ok_or(ConfigError::BadValue { key, value: text })?);
                }
                SavedModel::Property(PropertyModel { net: PropertyNet { encoder, head, kind, scale }, params })
            }
            "ddi" => {
                let head = head_from_kv(&kv, DDI_HEAD)?;
                let symmetrize = kv.require("ddi.symmetrize")?;
                SavedModel::Ddi(DdiModel { net: DdiNet { encoder, head, symmetrize }, params })
            }
            other => return Err(ConfigError::BadValue { key: "model.kind".into(), value: other.into() }.into()),
        };
        model.check_params()?;
        Ok((model, kv))
    }

    /// Every parameter the network reads must be present.
    fn check_params(&self) -> Result<(), ModelError> {
        let mut reference = ParamStore::new();
        let enc = self.encoder();
        enc.init_params(&mut reference);
        match self {
            SavedModel::Contrastive(m) => m.projector.init_params(&mut reference, 0),
            SavedModel::Property(m) => m.net.head.init_params(&mut reference, 0),
            SavedModel::Ddi(m) => m.net.head.init_params(&mut reference, 0),
        }
        for i in 0..reference.len() {
            let want = reference.get(i);
            match self.params().by_name(&want.name) {
                Some(p) if p.value.shape() == want.value.shape() => {}
                _ => return Err(ModelError::MissingParameter(want.name.clone())),
            }
        }
        Ok(())
    }

    pub fn into_contrastive(self) -> Result<ContrastiveModel, ModelError> {
        match self {
            SavedModel::Contrastive(m) => Ok(m),
            other => Err(ModelError::WrongKind { expected: "contrastive", found: other.kind().into() }),
        }
    }
}
