use thiserror::Error;

/// Failures of the rigid-body geometry helpers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("matrix is not skew-symmetric (symmetric part norm {0:.3e})")]
    NotSkew(f64),
    #[error("cannot project onto SO(3): determinant {0:.3e} is not positive")]
    NonPositiveDeterminant(f64),
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("invalid vehicle parameters: {0}")]
    InvalidVehicle(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("integration produced a non-finite state at t = {t} s")]
pub struct IntegrationError {
    pub t: f64,
}

/// Failures of the learning oracles.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(
        "Gram matrix factorization failed for output {output} (N = {n}, diag range [{min_diag:.3e}, {max_diag:.3e}], last jitter {jitter:.3e})"
    )]
    Factorization {
        output: usize,
        n: usize,
        min_diag: f64,
        max_diag: f64,
        jitter: f64,
    },
    #[error("dataset capacity {capacity} exceeded")]
    CapacityExceeded { capacity: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("least-squares oracle needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("posterior variance {0:.3e} is negative beyond round-off")]
    NegativeVariance(f64),
    #[error("dataset I/O: {0}")]
    Io(String),
}

/// Failures while building a gain certificate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("closed-loop matrix is not Hurwitz: eigenvalue {re:+.6e}{im:+.6e}i has non-negative real part")]
    NotHurwitz { re: f64, im: f64 },
    #[error("Q is not positive definite (min eigenvalue {0:.3e})")]
    QNotPositiveDefinite(f64),
    #[error("Lyapunov solution is not positive definite (min eigenvalue {0:.3e})")]
    PNotPositiveDefinite(f64),
    #[error("Lyapunov linear system is singular")]
    Singular,
}

/// A configuration value that failed validation, named by its dotted key path.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
}

impl ConfigError {
    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

/// Anything that aborts a closed-loop run.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
