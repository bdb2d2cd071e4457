//! Error type shared across the simulation library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, Error)]
pub enum SimError {
    /// A configuration value violates an invariant (counts, gains, geometry).
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Two fields (or a field and a basis) live on incompatible grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An estimator was given an unusable sample set.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// A non-finite value appeared in particle states or cached fields.
    #[error("simulation diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    /// An internal consistency check failed; indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),
}
