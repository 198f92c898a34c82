use thiserror::Error;

use crate::point::Point;

/// Errors produced by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model failed its construction-time checks.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A point lies outside the region where the model's local inverse is defined.
    #[error("point {0:?} lies outside the basin handled by this model")]
    OutsideBasin(Point),

    /// Newton refinement of a preimage did not converge.
    #[error("Newton refinement diverged from seed {seed:?} after {iterations} iterations")]
    NewtonDivergence { seed: Point, iterations: usize },

    /// A homotopy path for a periodic point stalled.
    #[error("continuation stalled at eps = {eps} starting from seed {seed:?}")]
    ContinuationFailure { seed: Point, eps: f64 },

    /// A requested enumeration would exceed the atom budget.
    #[error("predicted size {predicted} exceeds budget {budget}")]
    BudgetExceeded { predicted: u128, budget: u128 },

    /// The two smallest finite-time singular values could not be separated.
    #[error("singular values too close to separate a stable direction (log gap {log_gap:e})")]
    DegenerateSingularValues { log_gap: f64 },

    /// A prehistory tree is too shallow for the requested cutoff.
    #[error("prehistory depth {depth} is insufficient; need at least {required}")]
    DepthInsufficient { depth: usize, required: usize },

    /// Bowen's equation has no root in the search bracket.
    #[error("pressure function has no sign change on [{lo}, {hi}] (g(lo) = {g_lo}, g(hi) = {g_hi})")]
    NoSignChange { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    /// No atoms fell in any sampled Bowen ball.
    #[error("every sampled Bowen ball was empty")]
    EmptyBall,

    /// No atoms fell in the tube around a stable segment.
    #[error("no atoms in the tube around the stable segment through {0:?}")]
    EmptySlice(Point),

    /// Too few atoms for a dimension fit.
    #[error("slice holds {found} atoms, need at least {required}")]
    InsufficientAtoms { found: usize, required: usize },

    /// A component set used in a comparison carried no atom mass.
    #[error("component {0} carries no atom mass")]
    EmptyComponent(&'static str),

    /// A precondition on the arguments was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
