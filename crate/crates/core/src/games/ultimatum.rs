//! The discretized ultimatum game: the firm offers `a_f`, the worker accepts
//! iff the offer meets its threshold `a_w`.

use super::{ActionGrid, Agent, SimplexPoint, UtilityVector, FEEDBACK_ZERO};
use crate::error::{Error, Result};

/// Payoffs `(u_f, u_w)` of a pure profile.
pub fn utility_g1(a_f: f64, a_w: f64) -> (f64, f64) {
    if a_w <= a_f {
        (1.0 - a_f, a_f)
    } else {
        (0.0, 0.0)
    }
}

/// One-step expected utility of every pure action of `agent` against the
/// opponent's mixed strategy.
pub fn expected_feedback_g1(agent: Agent, opponent: &SimplexPoint, grid: ActionGrid) -> Result<UtilityVector> {
    if opponent.len() != grid.len() {
        return Err(Error::Structural(format!(
            "opponent strategy has {} entries, grid has {}",
            opponent.len(),
            grid.len()
        )));
    }
    let mut out = vec![0.0; grid.len()];
    match agent {
        Agent::Worker => worker_feedback_into(grid, opponent.mass(), &mut out),
        Agent::Firm => firm_feedback_into(grid, opponent.mass(), &mut out),
    }
    Ok(UtilityVector { values: out })
}

/// Worker utility at threshold `a_k`: `sum_{p >= k} x_f(p) a_p`.
pub fn worker_feedback_into(grid: ActionGrid, x_f: &[f64], out: &mut [f64]) {
    let mut tail = 0.0;
    for k in (0..grid.len()).rev() {
        let m = x_f[k];
        if m > FEEDBACK_ZERO {
            tail += m * grid.action(k);
        }
        out[k] = tail;
    }
}

/// Firm utility at offer `a_k`: `(sum_{r <= k} x_w(r)) (1 - a_k)`.
pub fn firm_feedback_into(grid: ActionGrid, x_w: &[f64], out: &mut [f64]) {
    let mut head = 0.0;
    for k in 0..grid.len() {
        let m = x_w[k];
        if m > FEEDBACK_ZERO {
            head += m;
        }
        out[k] = head * (1.0 - grid.action(k));
    }
}
