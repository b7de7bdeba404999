//! Action grids, strategies and payoffs for both bargaining games.

mod two_round;
mod ultimatum;

pub use two_round::{build_treeplex, expected_feedback_g2, SequenceIndex, SequenceKind, TwoRoundGame};
pub(crate) use two_round::{firm_feedback_g2_into, worker_feedback_g2_into};
pub use ultimatum::{expected_feedback_g1, firm_feedback_into, utility_g1, worker_feedback_into};

use crate::error::{Error, Result};

/// Opponent masses below this are treated as exact zeros when building feedback.
pub const FEEDBACK_ZERO: f64 = 1e-15;

/// Tolerance on the total mass of a simplex point.
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Agent {
    Firm,
    Worker,
}

impl Agent {
    pub fn name(self) -> &'static str {
        match self {
            Agent::Firm => "firm",
            Agent::Worker => "worker",
        }
    }

    pub fn opponent(self) -> Agent {
        match self {
            Agent::Firm => Agent::Worker,
            Agent::Worker => Agent::Firm,
        }
    }
}

/// The uniform grid `{0, 1/D, ..., 1}` shared by offers, thresholds and counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionGrid {
    d: usize,
}

impl ActionGrid {
    /// Requires `D > 2`.
    pub fn new(d: usize) -> Result<Self> {
        if d <= 2 {
            return Err(Error::Domain(format!("grid needs D > 2, got D = {d}")));
        }
        Ok(ActionGrid { d })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of actions, `D + 1`.
    pub fn len(&self) -> usize {
        self.d + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The action `k / D`.
    pub fn action(&self, k: usize) -> f64 {
        debug_assert!(k <= self.d);
        k as f64 / self.d as f64
    }

    pub fn actions(&self) -> Vec<f64> {
        (0..=self.d).map(|k| self.action(k)).collect()
    }

    /// Index of a grid value, if `value` lies within `1e-9` of the grid.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        if !value.is_finite() {
            return None;
        }
        let k = (value * self.d as f64).round();
        if k < 0.0 || k > self.d as f64 {
            return None;
        }
        if (k / self.d as f64 - value).abs() <= 1e-9 {
            Some(k as usize)
        } else {
            None
        }
    }
}

/// A mixed strategy over the `D + 1` grid actions.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint {
    mass: Vec<f64>,
}

impl SimplexPoint {
    /// Validates non-negativity and unit mass (within `1e-12`).
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::Structural("empty simplex point".into()));
        }
        if let Some(index) = mass.iter().position(|m| !m.is_finite()) {
            return Err(Error::NumericInput { index });
        }
        if let Some(i) = mass.iter().position(|&m| m < 0.0) {
            return Err(Error::Domain(format!("negative mass {} at index {i}", mass[i])));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::Domain(format!("mass sums to {total}, not 1")));
        }
        Ok(SimplexPoint { mass })
    }

    /// Wraps a vector the caller already knows to be a simplex point.
    pub(crate) fn from_vec_unchecked(mass: Vec<f64>) -> Self {
        SimplexPoint { mass }
    }

    pub fn pure(n: usize, k: usize) -> Self {
        let mut mass = vec![0.0; n];
        mass[k] = 1.0;
        SimplexPoint { mass }
    }

    pub fn uniform(n: usize) -> Self {
        SimplexPoint { mass: vec![1.0 / n as f64; n] }
    }

    /// Builds a point from atoms `(index, mass)`; unspecified entries are zero.
    pub fn from_atoms(n: usize, atoms: &[(usize, f64)]) -> Result<Self> {
        let mut mass = vec![0.0; n];
        for &(k, m) in atoms {
            if k >= n {
                return Err(Error::Structural(format!("atom index {k} outside {n} actions")));
            }
            mass[k] += m;
        }
        SimplexPoint::new(mass)
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.mass
    }
}

/// Per-action (G1) or per-sequence (G2) utility, one step or cumulative.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityVector {
    pub values: Vec<f64>,
}

impl UtilityVector {
    pub fn zeros(n: usize) -> Self {
        UtilityVector { values: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn add_assign(&mut self, other: &UtilityVector) {
        for (u, g) in self.values.iter_mut().zip(&other.values) {
            *u += g;
        }
    }
}

/// Inner product, used for expected utilities.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
