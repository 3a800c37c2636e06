use symplectic_lindblad::Error;

/// Command failure, grouped by exit status.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("config error: {0}")]
    Config(String),
    #[error("positivity threshold not reached: {0}")]
    NotReached(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::NotReached(_) => 3,
            Failure::Resolution(_) => 4,
            Failure::Numerical(_) => 5,
            Failure::Io(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::AsymmetricHamiltonian { .. }
            | Error::InvalidParameter(_)
            | Error::NonSymplectic { .. }
            | Error::NotPositiveDefinite
            | Error::UnsupportedForm(_)
            | Error::SingularFrame
            | Error::Json(_) => Failure::Config(msg),
            Error::GridTooCoarse { .. } | Error::DomainTooSmall { .. } | Error::TruncationLeak { .. } => {
                Failure::Resolution(msg)
            }
            Error::QuadratureNotConverged { .. } | Error::AsymptoticInvalid { .. } | Error::Unstable { .. } => {
                Failure::Numerical(msg)
            }
            Error::Io(_) | Error::Csv(_) => Failure::Io(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}
