use thiserror::Error;

/// Errors raised by the library.
///
/// Variants follow the kind of contract that was broken rather than the module
/// that noticed it, so callers can map them onto exit codes or messages.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("input domain: {0}")]
    InputDomain(String),

    /// A physical constraint of the model is violated (e.g. density above 1).
    #[error("constraint violated: {0}")]
    Constraint(String),

    /// The request exceeds what an exhaustive routine is willing to enumerate.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A documented precondition of the operation does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Initial data are not admissible (contacting particles with different velocities).
    #[error("inadmissible initial data: {0}")]
    Admissibility(String),

    /// A quantity that is zero by construction came out nonzero.
    #[error("internal consistency: {0}")]
    InternalConsistency(String),

    /// A proved invariant failed beyond tolerance.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
