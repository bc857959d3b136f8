use alloc::string::String;

/// Structural problems with a problem definition: wrong shapes, out-of-range
/// indices. Invariant violations (non-stochastic rows, missing coverage, ...) are
/// reported through [`crate::mdp::ValidationReport`] instead.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("{field}: expected length {expected}, found {found}")]
    Dimension {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("{field} must be positive")]
    Empty { field: String },
    #[error("state {state} out of range (n_states = {n_states})")]
    StateOutOfRange { state: usize, n_states: usize },
    #[error("action {action} out of range (n_actions = {n_actions})")]
    ActionOutOfRange { action: usize, n_actions: usize },
    #[error("coverage violated at state {state}, action {action}: target takes it, behavior never does")]
    Coverage { state: usize, action: usize },
    #[error("problem failed validation: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("matrix {0} is singular")]
    Singular(&'static str),
    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnerError {
    /// Iterates overflowed. Heavy-tailed traces make this an expected outcome for
    /// some behavior policies, so callers record it rather than panic.
    #[error("non-finite iterate at step {step}")]
    NonFinite { step: u64 },
    #[error("invalid stepsize schedule: {0}")]
    Schedule(String),
}
