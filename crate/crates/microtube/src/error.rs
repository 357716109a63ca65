//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: {reason}")]
    InvalidBox { reason: String },

    #[error("invalid micro-tube: {reason}")]
    InvalidMicroTube { reason: String },

    #[error("invalid pyramid config: {reason}")]
    InvalidConfig { reason: String },

    #[error("point ({x}, {y}) outside the unit square")]
    PointOutOfRange { x: f64, y: f64 },

    #[error("level {level} out of range (pyramid has {levels} levels)")]
    LevelOutOfRange { level: usize, levels: usize },

    #[error("empty ground-truth collection")]
    EmptyGroundTruth,

    #[error("threshold tau={tau} outside (0, 1]")]
    InvalidThreshold { tau: f64 },

    #[error("pyramid config hash mismatch: expected {expected}, got {actual}")]
    ConfigHashMismatch { expected: String, actual: String },

    #[error("transition shape mismatch: {reason}")]
    ShapeMismatch { reason: String },

    #[error("zero-area box cannot be encoded: {reason}")]
    DegenerateEncode { reason: String },

    #[error("invalid parameter: {reason}")]
    InvalidParameter { reason: String },

    #[error("detection groups misaligned: {reason}")]
    GroupMisaligned { reason: String },

    #[error("stream fusion mismatch: {reason}")]
    FusionMismatch { reason: String },

    #[error("empty score sequence")]
    EmptyScores,

    #[error("schema violation in {path}: {reason}")]
    Schema { path: String, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("toml error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    /// Stable machine-readable kind tag, used by the CLI's stderr reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidBox { .. } => "invalid_box",
            Error::InvalidMicroTube { .. } => "invalid_micro_tube",
            Error::InvalidConfig { .. } => "invalid_config",
            Error::PointOutOfRange { .. } => "point_out_of_range",
            Error::LevelOutOfRange { .. } => "level_out_of_range",
            Error::EmptyGroundTruth => "empty_ground_truth",
            Error::InvalidThreshold { .. } => "invalid_threshold",
            Error::ConfigHashMismatch { .. } => "config_hash_mismatch",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::DegenerateEncode { .. } => "degenerate_encode",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::GroupMisaligned { .. } => "group_misaligned",
            Error::FusionMismatch { .. } => "fusion_mismatch",
            Error::EmptyScores => "empty_scores",
            Error::Schema { .. } => "schema",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::TomlDe(_) | Error::TomlSer(_) => "toml",
        }
    }
}
