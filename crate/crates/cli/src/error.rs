use hetmol::autodiff::AutodiffError;
use hetmol::chem::ChemError;
use hetmol::config::ConfigError;
use hetmol::encoder::EncoderError;
use hetmol::finetune::FinetuneError;
use hetmol::hmg::HmgError;
use hetmol::kg::KgError;
use hetmol::model::ModelError;
use hetmol::pretrain::PretrainError;
use thiserror::Error;

/// Failures split by exit code: bad input (1) or a numeric breakdown (2).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    /// Prefix the message with where it happened, keeping the class.
    pub fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{what}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{what}: {m}")),
        }
    }
}

fn numeric_autodiff(e: &AutodiffError) -> bool {
    matches!(e, AutodiffError::NonFiniteValue { .. })
}

fn numeric_encoder(e: &EncoderError) -> bool {
    matches!(e, EncoderError::Autodiff(a) if numeric_autodiff(a))
}

fn classify(numeric: bool, e: impl ToString) -> CliError {
    if numeric {
        CliError::Numeric(e.to_string())
    } else {
        CliError::Input(e.to_string())
    }
}

impl From<AutodiffError> for CliError {
    fn from(e: AutodiffError) -> Self {
        classify(numeric_autodiff(&e), e)
    }
}

impl From<EncoderError> for CliError {
    fn from(e: EncoderError) -> Self {
        classify(numeric_encoder(&e), e)
    }
}

impl From<PretrainError> for CliError {
    fn from(e: PretrainError) -> Self {
        let numeric = match &e {
            PretrainError::Autodiff(a) => numeric_autodiff(a),
            PretrainError::Encoder(x) => numeric_encoder(x),
            _ => false,
        };
        classify(numeric, e)
    }
}

impl From<FinetuneError> for CliError {
    fn from(e: FinetuneError) -> Self {
        let numeric = match &e {
            FinetuneError::Autodiff(a) => numeric_autodiff(a),
            FinetuneError::Encoder(x) => numeric_encoder(x),
            _ => false,
        };
        classify(numeric, e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Input(e.to_string())
    }
}

macro_rules! input_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        }
    )*};
}

input_errors!(ChemError, ConfigError, HmgError, KgError, std::io::Error, serde_json::Error);
