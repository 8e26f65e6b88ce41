use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration field violates its invariant.
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// An evaluated UE ended up with no serving AP.
    #[error("UE {0} has an empty serving set")]
    EmptyServingSet(usize),
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(&'static str),
    #[error("MGF evaluated past its pole (1 - t*s = {0})")]
    MgfPole(f64),
    #[error("pairwise error needs two distinct symbols")]
    IdenticalSymbols,
    #[error("report: {0}")]
    Report(String),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid { field: field.into(), reason: reason.into() }
    }

    /// True for errors caused by a model that cannot be evaluated, as opposed
    /// to bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::EmptyServingSet(_) | Error::MgfPole(_))
    }
}
