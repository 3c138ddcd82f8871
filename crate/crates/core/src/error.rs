//! Error type shared by every stage of the calibration pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its valid domain. `field` names the offending input.
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("frequency {freq_hz} Hz is at or above the Nyquist limit {nyquist_hz} Hz")]
    Nyquist { freq_hz: f64, nyquist_hz: f64 },

    #[error("sample-rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: f64, right: f64 },

    #[error("signal too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },

    #[error("desired signal has no energy inside the evaluation band")]
    NoInBandEnergy,

    #[error("frequency response has no coherence estimate")]
    MissingCoherence,

    #[error("underdetermined fit: {available} usable bins, need at least {needed}")]
    Underdetermined { available: usize, needed: usize },

    #[error("singular least-squares system: {0}")]
    Singular(String),

    #[error("degenerate denominator (all coefficients zero)")]
    DegenerateDenominator,

    #[error("unknown plant preset `{0}` (expected `small` or `rich`)")]
    UnknownPreset(String),

    #[error("device failure: {0}")]
    Device(String),

    #[error("location list is empty")]
    EmptyLocations,

    #[error("duplicate location ({x}, {y})")]
    DuplicateLocation { x: f64, y: f64 },

    #[error("device map is empty")]
    EmptyMap,

    #[error("unsupported format_version {found} (supported: {supported})")]
    VersionMismatch { found: u64, supported: u64 },

    #[error("malformed {what}: {reason}")]
    Malformed { what: String, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
