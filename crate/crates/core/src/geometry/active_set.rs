//! Primal active-set projection onto a treeplex.
//!
//! Minimizes `|x - v|^2` subject to `E x = e` (one row per infoset: children
//! minus parent, right-hand side 1 under the root) and `x >= 0`. The working
//! set holds bounds `x_j = 0`. Each iteration solves the equality-constrained
//! least-squares problem on the free coordinates through its normal equations
//! `E_F E_F^T lambda = e - E_F v_F`, then either steps toward its solution until a
//! bound blocks, or drops the bound with the most negative multiplier.

use super::scale_of;
use super::treeplex::{RealizationPlan, Treeplex};
use crate::error::{Error, Result};

/// Relative KKT residual a returned plan must meet.
pub const KKT_TOL: f64 = 1e-10;

/// Post-solve clamp: entries in `[-1e-12, 0)` become 0.
const CLAMP: f64 = 1e-12;

/// Projection from the uniform plan with an empty working set.
pub fn project_treeplex(v: &[f64], t: &Treeplex) -> Result<RealizationPlan> {
    let qp = Qp::new(v, t)?;
    let x0 = t.uniform_plan().into_vec();
    let fixed = vec![false; t.len()];
    qp.solve(x0, fixed)
}

/// Projection warm-started from a feasible plan `hint` (typically the previous
/// iterate): its zero entries seed the working set. Falls back to a cold start
/// if the warm start does not terminate.
pub fn project_treeplex_warm(v: &[f64], t: &Treeplex, hint: &[f64]) -> Result<RealizationPlan> {
    let qp = Qp::new(v, t)?;
    if hint.len() != t.len() || t.constraint_violation(hint) > super::treeplex::PLAN_TOL {
        return project_treeplex(v, t);
    }
    let x0: Vec<f64> = hint.iter().map(|&h| h.max(0.0)).collect();
    let mut fixed: Vec<bool> = (0..t.len()).map(|j| j != t.root() && x0[j] <= 0.0).collect();
    qp.free_one_child_per_infoset(&mut fixed);
    match qp.solve(x0, fixed) {
        Ok(plan) => Ok(plan),
        Err(Error::SolverFailure { .. }) => project_treeplex(v, t),
        Err(e) => Err(e),
    }
}

/// Relative KKT residual of a candidate plan `x` for the projection of `v`.
///
/// Multipliers are fitted on the support of `x`; an infoset whose children all
/// vanish keeps its child with the largest input free, which is the right
/// choice whenever those children are terminal.
pub fn kkt_residual(v: &[f64], t: &Treeplex, x: &[f64]) -> Result<f64> {
    let qp = Qp::new(v, t)?;
    if x.len() != t.len() {
        return Err(Error::Structural(format!("plan has {} entries, treeplex {}", x.len(), t.len())));
    }
    let mut fixed: Vec<bool> = (0..t.len()).map(|j| j != t.root() && x[j] <= 0.0).collect();
    qp.free_one_child_per_infoset(&mut fixed);
    let mut y = vec![0.0; t.len()];
    let mut lambda = vec![0.0; t.infosets().len()];
    if !qp.eqp(&fixed, &mut y, &mut lambda) {
        return Ok(f64::INFINITY);
    }
    Ok(qp.residual(x, &fixed, &lambda))
}

struct Qp<'a> {
    t: &'a Treeplex,
    v: &'a [f64],
    /// Per sequence: the constraint rows it appears in, with coefficient.
    inc: Vec<Vec<(usize, f64)>>,
    /// Right-hand side `e` of the equality constraints.
    e: Vec<f64>,
    scale: f64,
}

impl<'a> Qp<'a> {
    fn new(v: &'a [f64], t: &'a Treeplex) -> Result<Self> {
        if v.len() != t.len() {
            return Err(Error::Structural(format!("input has {} entries, treeplex {}", v.len(), t.len())));
        }
        if let Some(index) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NumericInput { index });
        }
        let root = t.root();
        let mut inc = vec![Vec::new(); t.len()];
        let mut e = vec![0.0; t.infosets().len()];
        for (i, info) in t.infosets().iter().enumerate() {
            for &c in &info.children {
                inc[c].push((i, 1.0));
            }
            if info.parent == root {
                e[i] = 1.0;
            } else {
                inc[info.parent].push((i, -1.0));
            }
        }
        Ok(Qp { t, v, inc, e, scale: scale_of(v) })
    }

    /// Keeps `[E; I_W]` of full row rank: every infoset needs a free child.
    fn free_one_child_per_infoset(&self, fixed: &mut [bool]) {
        for info in self.t.infosets() {
            if info.children.iter().all(|&c| fixed[c]) {
                let best = info
                    .children
                    .iter()
                    .copied()
                    .max_by(|&a, &b| self.v[a].partial_cmp(&self.v[b]).unwrap().then(b.cmp(&a)))
                    .unwrap();
                fixed[best] = false;
            }
        }
    }

    /// Solves the equality-constrained subproblem with `x_j = 0` on `fixed`.
    /// Returns false if the normal matrix is singular.
    fn eqp(&self, fixed: &[bool], y: &mut [f64], lambda: &mut [f64]) -> bool {
        let m = self.e.len();
        let mut mat = vec![0.0; m * m];
        let mut rhs = self.e.clone();
        let root = self.t.root();
        for j in 0..self.t.len() {
            if j == root || fixed[j] {
                continue;
            }
            for &(a, ca) in &self.inc[j] {
                rhs[a] -= ca * self.v[j];
                for &(b, cb) in &self.inc[j] {
                    mat[a * m + b] += ca * cb;
                }
            }
        }
        if !cholesky_solve(&mut mat, &mut rhs, m) {
            return false;
        }
        lambda.copy_from_slice(&rhs);
        for j in 0..self.t.len() {
            y[j] = if j == root {
                1.0
            } else if fixed[j] {
                0.0
            } else {
                self.v[j] + self.et_lambda(j, lambda)
            };
        }
        true
    }

    fn et_lambda(&self, j: usize, lambda: &[f64]) -> f64 {
        self.inc[j].iter().map(|&(i, c)| c * lambda[i]).sum()
    }

    /// Bound multiplier of a fixed coordinate.
    fn mu(&self, j: usize, lambda: &[f64]) -> f64 {
        -self.v[j] - self.et_lambda(j, lambda)
    }

    fn residual(&self, x: &[f64], fixed: &[bool], lambda: &[f64]) -> f64 {
        let root = self.t.root();
        let mut r = self.t.constraint_violation(x);
        for j in 0..self.t.len() {
            if j == root {
                continue;
            }
            r = r.max(-x[j]);
            if fixed[j] {
                r = r.max(-self.mu(j, lambda)).max(x[j].abs());
            } else {
                r = r.max((x[j] - self.v[j] - self.et_lambda(j, lambda)).abs());
            }
        }
        r / self.scale
    }

    fn solve(&self, mut x: Vec<f64>, mut fixed: Vec<bool>) -> Result<RealizationPlan> {
        let n = self.t.len();
        let root = self.t.root();
        let cap = 10 * n;
        let mut y = vec![0.0; n];
        let mut lambda = vec![0.0; self.e.len()];
        let zero_step = 1e-12 * self.scale;
        let mu_tol = -1e-11 * self.scale;
        let mut last_residual = f64::INFINITY;

        for iter in 0..cap {
            if !self.eqp(&fixed, &mut y, &mut lambda) {
                return Err(Error::SolverFailure { iterations: iter, residual: last_residual });
            }
            let step = (0..n).map(|j| (y[j] - x[j]).abs()).fold(0.0, f64::max);
            if step <= zero_step {
                x.copy_from_slice(&y);
                let worst = (0..n)
                    .filter(|&j| j != root && fixed[j])
                    .map(|j| (j, self.mu(j, &lambda)))
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
                match worst {
                    Some((j, mu)) if mu < mu_tol => fixed[j] = false,
                    _ => {
                        for xj in x.iter_mut() {
                            if *xj < 0.0 && *xj >= -CLAMP {
                                *xj = 0.0;
                            }
                        }
                        last_residual = self.residual(&x, &fixed, &lambda);
                        if last_residual <= KKT_TOL {
                            return Ok(RealizationPlan::from_vec_unchecked(x));
                        }
                        break;
                    }
                }
                continue;
            }
            // Ratio test against the bounds of free coordinates. The last free
            // child of an infoset equals its parent's weight, so it never blocks
            // on its own; fixing it would make the normal matrix singular.
            let mut free_children = vec![0usize; self.e.len()];
            for j in 0..n {
                if let (Some(i), false) = (self.t.infoset_of(j), fixed[j]) {
                    free_children[i] += 1;
                }
            }
            let mut alpha = 1.0;
            let mut block = None;
            for j in 0..n {
                if j == root || fixed[j] {
                    continue;
                }
                if self.t.infoset_of(j).is_some_and(|i| free_children[i] == 1) {
                    continue;
                }
                let p = y[j] - x[j];
                if p < 0.0 {
                    let ratio = x[j].max(0.0) / -p;
                    if ratio < alpha {
                        alpha = ratio;
                        block = Some(j);
                    }
                }
            }
            match block {
                Some(b) => {
                    for j in 0..n {
                        x[j] += alpha * (y[j] - x[j]);
                    }
                    x[b] = 0.0;
                    fixed[b] = true;
                }
                None => x.copy_from_slice(&y),
            }
            last_residual = self.residual(&x, &fixed, &lambda);
        }
        Err(Error::SolverFailure { iterations: cap, residual: last_residual })
    }
}

/// In-place Cholesky solve of the symmetric positive definite system `a z = b`;
/// `b` is overwritten with `z`. Returns false on a non-positive pivot.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], m: usize) -> bool {
    for j in 0..m {
        let mut d = a[j * m + j];
        for k in 0..j {
            d -= a[j * m + k] * a[j * m + k];
        }
        if d <= 1e-13 {
            return false;
        }
        let d = d.sqrt();
        a[j * m + j] = d;
        for i in (j + 1)..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = s / d;
        }
    }
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * m + k] * b[k];
        }
        b[i] = s / a[i * m + i];
    }
    for i in (0..m).rev() {
        let mut s = b[i];
        for k in (i + 1)..m {
            s -= a[k * m + i] * b[k];
        }
        b[i] = s / a[i * m + i];
    }
    true
}
