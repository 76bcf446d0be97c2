//! Error type shared by every layer of the crate.

/// Everything that can go wrong, from config validation to quadrature.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A configuration value or combination of values is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// An estimator was asked for a quantity the tallies cannot support
    /// (for example a CHSH pair with zero detected coincidences).
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// An argument lies outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature hit its subdivision cap before reaching the
    /// requested error target.
    #[error("quadrature failed to converge: {0}")]
    QuadratureFailure(String),

    /// An analytic prediction is undefined for the given scenario
    /// (for example a vanishing coincidence denominator).
    #[error("degenerate scenario: {0}")]
    DegenerateScenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
