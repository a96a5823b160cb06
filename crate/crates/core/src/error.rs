use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid optical table: {0}")]
    InvalidTable(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The integrator ran out of evaluations before meeting the tolerance.
    #[error(
        "quadrature did not converge after {evals} evaluations: value {value:e}, error estimate {abs_err:e}"
    )]
    NonConvergence {
        value: f64,
        abs_err: f64,
        evals: usize,
    },

    #[error("force curve point {index} (d = {separation:e} m) failed: {source}")]
    CurvePoint {
        index: usize,
        separation: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("singular least-squares system: {0}")]
    RankDeficient(String),

    #[error("inconsistent calibration data: {0}")]
    InconsistentData(String),

    #[error("planned separation {separation:e} m (sweep {sweep}) is below jump-to-contact at {jump_to_contact:e} m")]
    BelowJumpToContact {
        sweep: usize,
        separation: f64,
        jump_to_contact: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors that come from an integrator failing to converge.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Error::NonConvergence { .. } => true,
            Error::CurvePoint { source, .. } => source.is_non_convergence(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
