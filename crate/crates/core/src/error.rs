use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument or parameter lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("model state error: {0}")]
    State(String),

    /// The null space of the generator is not one-dimensional.
    #[error("singular steady state: {0}")]
    Singular(String),

    #[error("ill-conditioned constrained solve (condition number {cond:.3e})")]
    Conditioning { cond: f64 },

    /// The counting-field eigenvalue branch is not separated from the rest of the spectrum.
    #[error("eigenvalue branch ambiguous at lambda={lambda}: gap {gap:.3e}")]
    BranchAmbiguity { lambda: f64, gap: f64 },

    #[error("degenerate baseline cumulant j0[{index}] = {value:e}")]
    DegenerateSample { index: usize, value: f64 },

    #[error("generation quality: {rejected} of {drawn} draws were degenerate")]
    GenerationQuality { rejected: usize, drawn: usize },

    #[error("absorbing state {0} reachable in jump process")]
    AbsorbingState(usize),

    #[error("constraint infeasible: acceptance rate {rate:.4}")]
    InfeasibleConstraint { rate: f64 },

    /// Two independent computation routes disagree beyond tolerance.
    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures caused by numerical quality rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_)
                | Error::Conditioning { .. }
                | Error::BranchAmbiguity { .. }
                | Error::DegenerateSample { .. }
                | Error::GenerationQuality { .. }
                | Error::AbsorbingState(_)
                | Error::InfeasibleConstraint { .. }
                | Error::OracleMismatch(_)
        )
    }
}
