use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use hetmol::config::KeyValues;

use crate::error::CliError;

macro_rules! settings {
    ($($field:ident => $key:literal : $help:literal),* $(,)?) => {
        /// Run settings. Every flag may also appear in the `--config` file
        /// under the same name; flags win.
        #[derive(Debug, Clone, Default, Args)]
        pub struct Settings {
            /// `key=value` file of settings.
            #[arg(long)]
            pub config: Option<PathBuf>,
            $(
                #[doc = $help]
                #[arg(long = $key, value_name = "VALUE")]
                pub $field: Option<String>,
            )*
        }

        impl Settings {
            fn flags(&self) -> Vec<(&'static str, &Option<String>)> {
                vec![$(($key, &self.$field)),*]
            }

            pub fn known_keys() -> &'static [&'static str] {
                &[$($key),*]
            }
        }
    };
}

settings! {
    seed => "seed": "Root seed for every random stream (required).",
    views => "views": "Comma-separated views among M, EM, DM.",
    out => "out": "Output directory, or output file for predict, eval and export-attention.",
    input => "input": "SMILES list (`smiles[TAB]drug_id[TAB]labels...`) or, for pair tasks, a pair file.",
    rules => "rules": "Fragmentation rule table; the built-in table when absent.",
    elemental_kg => "elemental-kg": "Elemental knowledge-graph triples; the built-in graph when absent.",
    drug_kg => "drug-kg": "Drug knowledge-graph triples, embedded with TransE for the drug view.",
    embeddings => "embeddings": "Precomputed drug embeddings (`name[TAB]values...`), instead of --drug-kg.",
    transe_dim => "transe-dim": "TransE embedding width.",
    transe_epochs => "transe-epochs": "TransE training epochs.",
    d => "d": "Hidden width.",
    layers => "layers": "Message-passing layers.",
    heads => "heads": "Attention heads.",
    k_pe => "k-pe": "Laplacian positional-encoding width.",
    leaky_slope => "leaky-slope": "LeakyReLU negative slope.",
    pool_ratio => "pool-ratio": "Fraction of items kept by the pooling readout.",
    batch_size => "batch-size": "Mini-batch size.",
    n_random => "n-random": "Random drug molecules per pretraining batch.",
    tau => "tau": "Contrastive temperature.",
    dz => "dz": "Projection width.",
    epochs => "epochs": "Training epochs.",
    max_steps => "max-steps": "Stop pretraining after this many optimizer steps.",
    lr => "lr": "Adam step size.",
    task => "task": "classification, regression or ddi.",
    pretrained => "pretrained": "Pretrained checkpoint whose encoder initialises fine-tuning.",
    folds => "folds": "Cross-validation folds.",
    patience => "patience": "Early-stopping patience in epochs.",
    plateau_decay => "plateau-decay": "Step-size factor after half the patience without improvement.",
    split => "split": "transductive, inductive-old-new or inductive-new-new.",
    symmetrize => "symmetrize": "Average pair scores over both argument orders (true/false).",
    checkpoint => "checkpoint": "Checkpoint to load.",
    predictions => "predictions": "Prediction TSV scored by eval instead of running a checkpoint.",
}

/// Resolved settings: config file entries overlaid with flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kv: KeyValues,
}

impl RunConfig {
    pub fn resolve(s: &Settings) -> Result<Self, CliError> {
        let mut kv = match &s.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
                KeyValues::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
            }
            None => KeyValues::new(),
        };
        for (k, _) in kv.iter() {
            if !Settings::known_keys().contains(&k) {
                return Err(CliError::input(format!("unknown config key `{k}`")));
            }
        }
        for (key, value) in s.flags() {
            if let Some(v) = value {
                kv.set(key, v);
            }
        }
        let cfg = RunConfig { kv };
        cfg.require::<u64>("seed")?;
        Ok(cfg)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        Ok(self.kv.get(key)?)
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.kv.get_or(key, default)?)
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        Ok(self.kv.require(key)?)
    }

    pub fn seed(&self) -> u64 {
        self.kv.require("seed").expect("checked in resolve")
    }

    /// A path setting that must name an existing file.
    pub fn existing_path(&self, key: &str) -> Result<Option<PathBuf>, CliError> {
        match self.kv.get_str(key) {
            None => Ok(None),
            Some(p) if Path::new(p).exists() => Ok(Some(PathBuf::from(p))),
            Some(p) => Err(CliError::input(format!("--{key}: `{p}` does not exist"))),
        }
    }

    pub fn require_existing(&self, key: &str) -> Result<PathBuf, CliError> {
        self.existing_path(key)?.ok_or_else(|| CliError::input(format!("--{key} is required")))
    }

    pub fn out(&self) -> Result<PathBuf, CliError> {
        self.kv.get_str("out").map(PathBuf::from).ok_or_else(|| CliError::input("--out is required"))
    }
}
