//! Follow-the-Regularized-Leader dynamics in two discretized bargaining games.
//!
//! The ultimatum game (`G1`) has a firm choosing an offer and a worker choosing
//! an acceptance threshold, both on the grid `{0, 1/D, ..., 1}`. The two-round
//! game (`G2`) adds a discounted counter-offer by the worker, and strategies live
//! on sequence-form polytopes (treeplexes).
//!
//! Both agents run FTRL with a Euclidean regularizer and full feedback, which
//! reduces every update to a nearest-point projection. The crate provides the
//! games, the projections, the learning loop, equilibrium certificates and
//! invariant monitors, and the meta-game over initial strategies.

pub mod analysis;
pub mod error;
pub mod games;
pub mod geometry;
pub mod learner;
pub mod metagame;

pub use error::{Error, Result};
pub use games::{ActionGrid, Agent, SequenceIndex, SequenceKind, SimplexPoint, TwoRoundGame, UtilityVector};
pub use geometry::{RationalScalar, RealizationPlan, Treeplex};
pub use learner::{Arithmetic, GameKind, LearnerConfig, Profile, Reference, Trajectory};
