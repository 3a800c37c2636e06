use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("hamiltonian matrix is not symmetric (h12 = {h12}, h21 = {h21})")]
    AsymmetricHamiltonian { h12: f64, h21: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("transform is not symplectic: |CᵀJC − J| = {residual:e}")]
    NonSymplectic { residual: f64 },

    #[error("quadrature did not converge after {panels} panels (error estimate {estimate:e}, target {target:e})")]
    QuadratureNotConverged {
        panels: usize,
        estimate: f64,
        target: f64,
    },

    #[error("no closed-form reduction applies: {0}")]
    UnsupportedForm(String),

    #[error("grid too coarse: chord tail {tail:e} exceeds tolerance {tolerance:e}")]
    GridTooCoarse { tail: f64, tolerance: f64 },

    #[error("phase-space box too small: edge value {edge:e} exceeds tolerance {tolerance:e}")]
    DomainTooSmall { edge: f64, tolerance: f64 },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("asymptotic purity formula invalid: smallest eigenvalue of −M(−t) is {eigenvalue:e} (needs > {threshold:e})")]
    AsymptoticInvalid { eigenvalue: f64, threshold: f64 },

    #[error("momentum-dissipation frame is singular: H11 = 0")]
    SingularFrame,

    #[error("explicit integration became unstable at t = {time}")]
    Unstable { time: f64 },

    #[error("Fock truncation leak: boundary population {population:e} exceeds {threshold:e}")]
    TruncationLeak { population: f64, threshold: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
