use thiserror::Error;

/// Errors produced anywhere in the decomposition pipeline.
#[derive(Debug, Error)]
pub enum GmdError {
    #[error("invalid shape function: {0}")]
    InvalidShape(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample count {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("aliasing: harmonic frequency {frequency} needs at least {required} samples, got {available}")]
    Aliasing {
        frequency: f64,
        required: usize,
        available: usize,
    },

    #[error("energy ratio is undefined for a zero signal")]
    ZeroSignal,

    #[error("frame normalizer vanishes at frequency bin {bin} carrying masked content")]
    CoverageGap { bin: i64 },

    #[error("no squeezed energy passes the ridge threshold")]
    EmptyDecomposition,

    #[error("k-means failed to converge after {attempts} attempts")]
    KMeansFailed { attempts: usize },

    #[error("phase is not strictly increasing at sample {index}; smooth the instantaneous frequency first")]
    NonMonotonePhase { index: usize },

    #[error("amplitude falls below the conditioning floor {floor:e} at sample {index}")]
    IllConditionedAmplitude { index: usize, floor: f64 },

    #[error("degenerate atom with zero norm at iteration {iteration}")]
    DegenerateAtom { iteration: usize },

    #[error("residual stalled at iteration {iteration}: {before:e} -> {after:e}")]
    ResidualStalled {
        iteration: usize,
        before: f64,
        after: f64,
    },

    #[error("no root of the band-edge equation for N={level}, d={radius}, s={scaling}")]
    NoResolutionRoot {
        level: f64,
        radius: f64,
        scaling: f64,
    },

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("malformed signal file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = GmdError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> GmdError {
    GmdError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
