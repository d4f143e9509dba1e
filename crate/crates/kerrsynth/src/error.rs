use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation weight {weight:.3e} exceeds {limit:.0e}; increase n_max")]
    TruncationTooSmall { weight: f64, limit: f64 },
    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NonHermitian(f64),
    #[error("operators do not commute (max |[A,B]| = {0:.3e})")]
    NonCommuting(f64),
    #[error("Kraus completeness violated (max deviation {0:.3e})")]
    CompletenessViolation(f64),
    #[error("transmittance eta = {0} outside (0, 1]")]
    EtaOutOfRange(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("keep set must be a nonempty subset of factors")]
    EmptyKeepSet,
    #[error("factor index {index} out of range for {nfactors} factors")]
    InvalidFactor { index: usize, nfactors: usize },
    #[error("state has no support under the conditional map (P_s = {0:.3e})")]
    EmptySupport(f64),
    #[error("population {0:.3e} at the truncation edge; state too close to n_max")]
    TruncationEdge(f64),
    #[error("covariance matrix violates the uncertainty relation (min eig {0:.3e})")]
    UnphysicalCovariance(f64),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

pub type Result<T> = std::result::Result<T, Error>;
