use crate::tensor::TensorError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("layer {layer}: expected input width {expected}, got {got}")]
    WidthMismatch {
        layer: usize,
        expected: usize,
        got: usize,
    },

    #[error("a chain needs at least one layer")]
    EmptyChain,

    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("empty input to {0}")]
    EmptyInput(&'static str),

    #[error("fsir state outside the domain: S={s}, I={i}")]
    Domain { s: f64, i: f64 },

    #[error("non-finite state at solver step {step}")]
    NonFinite { step: usize },

    #[error("sobol dimension {0} exceeds the bundled direction numbers")]
    SobolDimension(usize),

    #[error("checkpoint parse error on line {line}: {reason}")]
    Checkpoint { line: usize, reason: String },

    #[error("config error on line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}
