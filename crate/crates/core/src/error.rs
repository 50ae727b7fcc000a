use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("invalid scenario: {0}")]
    Invalid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("coincident points: node and base share position {0:?}")]
    CoincidentPoints([f64; 3]),

    #[error("beampattern has imaginary residue {residue:e} (covariance not Hermitian)")]
    NonHermitian { residue: f64 },

    #[error("beam part of the action is all zero; power normalization undefined")]
    ZeroBeam,

    #[error("total power is zero; cannot normalize")]
    ZeroPower,

    #[error("step called on a finished episode")]
    EpisodeDone,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
