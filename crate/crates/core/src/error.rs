use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Parameters or options fail validation.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Mesh or discretisation setup is inconsistent with the problem.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A collocation block could not be factored.
    #[error("singular collocation block in element {element}")]
    SingularMesh { element: usize },

    /// A dense linear solve hit a zero pivot.
    #[error("singular matrix (pivot {pivot})")]
    Singular { pivot: usize },

    /// Newton iteration hit a singular Jacobian.
    #[error("singular Jacobian at iteration {iteration}: fold or symmetry")]
    FoldOrSymmetry { iteration: usize },

    /// The eigenvalue iteration did not converge.
    #[error("eigenvalue iteration did not converge after {0} sweeps")]
    EigenNoConvergence(usize),

    /// The integrator produced a non-finite state.
    #[error("integration blow-up at t = {t}")]
    Blowup { t: f64 },

    /// The signal in the analysis window is not periodic.
    #[error("signal not periodic: {0}")]
    NotPeriodic(String),

    /// A least-squares design matrix was rank deficient.
    #[error("rank-deficient design matrix")]
    RankDeficient,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
