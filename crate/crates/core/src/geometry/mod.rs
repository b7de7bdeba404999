//! Euclidean projections onto the strategy polytopes.
//!
//! The simplex projection is the exact sort-and-threshold rule, in `f64` and in
//! arbitrary-precision rationals. The treeplex projection is a small primal
//! active-set quadratic program.

mod active_set;
mod rational;
mod simplex;
mod treeplex;

pub use active_set::{kkt_residual, project_treeplex, project_treeplex_warm};
pub use rational::{project_simplex_exact, rational_from_f64, rational_to_f64, RationalScalar};
pub use simplex::{project_simplex, project_simplex_certified, project_simplex_into, SimplexCertificate};
pub use treeplex::{behavioral_from_plan, behavioral_with_limit, Infoset, LocalStrategy, RealizationPlan, Treeplex};

/// Max-norm of a vector, at least 1. Used to scale solver tolerances.
pub(crate) fn scale_of(v: &[f64]) -> f64 {
    v.iter().fold(1.0_f64, |m, x| m.max(x.abs()))
}
