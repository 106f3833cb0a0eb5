use alloc::string::String;

/// Errors produced by the fingerprint, metric, simulator and fuzzy-extractor
/// routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two bit vectors that must be the same length are not.
    #[error("length mismatch: {left} bits vs {right} bits")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("device mismatch: expected `{expected}`, found `{found}`")]
    DeviceMismatch { expected: String, found: String },

    #[error("duplicate device `{0}`")]
    DuplicateDevice(String),

    #[error("temperature mismatch: expected {expected} °C, found {found} °C")]
    TemperatureMismatch { expected: i32, found: i32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Extractor parameters admit no error-free subsample, or need more
    /// lockers than the helper-data format can address.
    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("calibration target unattainable: {0}")]
    Unattainable(String),

    #[error("malformed helper data: {0}")]
    Format(String),

    /// No locker opened: the fingerprint is too far from the enrolled one.
    #[error("reproduction failed: no locker opened")]
    ReproductionFailed,
}

pub type Result<T> = core::result::Result<T, Error>;
