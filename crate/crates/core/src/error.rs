use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("could not place atom {index} after {attempts} consecutive rejections (minimum separation {min_separation:e} m)")]
    Crowded {
        index: usize,
        attempts: usize,
        min_separation: f64,
    },

    #[error("{} atom pair(s) closer than {min_separation:e} m, first: {:?}", pairs.len(), pairs.first())]
    SeparationViolation {
        min_separation: f64,
        pairs: Vec<(usize, usize, f64)>,
    },

    #[error("atom count {requested} exceeds the configured cap of {cap}")]
    TooManyAtoms { requested: usize, cap: usize },

    #[error("eigensolver failed for an order-{order} matrix (dump: {dump:?})")]
    Eigensolver {
        order: usize,
        dump: Option<std::path::PathBuf>,
    },

    #[error("spectral invariant violated: {0}")]
    SpectralInvariant(String),

    #[error("negative intensity {value:e} at t = {time} (tolerance {tolerance:e})")]
    NegativeIntensity {
        time: f64,
        value: f64,
        tolerance: f64,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("no positive eigenvalues available for the empirical rate source")]
    NoPositiveRates,
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidInput(_) | Error::TooManyAtoms { .. })
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
