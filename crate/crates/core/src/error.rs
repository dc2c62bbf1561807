use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// The dispersive hierarchy required by the effective-model reduction is violated.
    #[error("regime error: {0}")]
    Regime(String),

    #[error("scheme error: {0}")]
    Scheme(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("integrator failure at t = {t:e}: {reason}")]
    Integrator { t: f64, reason: String },

    /// Mean spin vanishes, so the Ramsey parameter is undefined.
    #[error("degenerate spin: |<S>| = {mean_spin:e} is below threshold {threshold:e}")]
    DegenerateSpin { mean_spin: f64, threshold: f64 },

    #[error("fit diverged after {iterations} iterations: {reason}")]
    FitDivergence {
        iterations: usize,
        reason: String,
        trace: Vec<[f64; 3]>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Scheme(_) | Error::Domain(_) => 2,
            _ => 3,
        }
    }
}
