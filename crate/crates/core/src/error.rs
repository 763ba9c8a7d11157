use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("id {id} is outside a vocabulary of size {size}")]
    OutOfVocabulary { id: usize, size: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{have} distinct ionic liquids cannot fill {folds} folds")]
    TooFewIls { have: usize, folds: usize },

    #[error("R² is undefined for a target with zero variance")]
    UndefinedR2,

    #[error("MAPE is undefined for a target containing zero")]
    UndefinedMape,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unknown {role} {name:?}; nearest matches: {}", suggestions.join(", "))]
    UnknownIon {
        role: &'static str,
        name: String,
        suggestions: Vec<String>,
    },

    #[error("artifact format: {0}")]
    Format(String),

    #[error("artifact version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("expected a {expected} artifact, found {found}")]
    Kind { expected: String, found: String },

    #[error("{role} vocabulary fingerprint mismatch")]
    Fingerprint { role: &'static str },

    #[error("artifact payload: {0}")]
    Payload(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
