//! Runtime checks of the structural invariants behind ultimatum-game convergence,
//! and a randomized audit that runs them.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{f_min, w_max, SUPPORT_TOL};
use crate::error::Result;
use crate::games::ActionGrid;
use crate::geometry::scale_of;
use crate::learner::{run_dynamics_observed, Fault, LearnerConfig, StepObserver, StepRecord};

/// Slack on the shape checks of a single strategy vector.
const SHAPE_TOL: f64 = 1e-10;

/// Relative slack on the projection identities.
const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Monitor {
    /// The worker's strategy is non-increasing in the threshold.
    WorkerMonotone,
    /// The firm's strategy is unimodal in the offer.
    FirmUnimodal,
    /// No worker movement once `w_max <= f_min`.
    WorkerFrozen,
    /// The worker's mass on `w_max` falls while `f_min < w_max`.
    WorkerMaxDecreases,
    /// `w_max` never increases.
    WmaxNonIncreasing,
    /// On the support, output differences equal input differences.
    MassDifference,
    /// The projection preserves the order of its inputs.
    OrderPreservation,
}

impl Monitor {
    pub const ALL: [Monitor; 7] = [
        Monitor::WorkerMonotone,
        Monitor::FirmUnimodal,
        Monitor::WorkerFrozen,
        Monitor::WorkerMaxDecreases,
        Monitor::WmaxNonIncreasing,
        Monitor::MassDifference,
        Monitor::OrderPreservation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Monitor::WorkerMonotone => "worker_monotone",
            Monitor::FirmUnimodal => "firm_unimodal",
            Monitor::WorkerFrozen => "worker_frozen",
            Monitor::WorkerMaxDecreases => "wmax_mass_decreases",
            Monitor::WmaxNonIncreasing => "wmax_non_increasing",
            Monitor::MassDifference => "mass_difference",
            Monitor::OrderPreservation => "order_preservation",
        }
    }
}

/// All monitors for one ultimatum run. Records the first violating step of
/// each monitor; step `t` is the update producing iterate `t + 1`.
///
/// Shape monitors apply to every iterate after the first. The firm's unimodality
/// additionally needs a non-increasing initial worker, so it is only armed
/// when the initial worker strategy has that shape.
#[derive(Debug, Clone)]
pub struct MonitorSet {
    firm_unimodal_armed: bool,
    first_violation: BTreeMap<Monitor, usize>,
}

impl MonitorSet {
    pub fn new(init_w: &[f64]) -> Self {
        MonitorSet { firm_unimodal_armed: is_non_increasing(init_w), first_violation: BTreeMap::new() }
    }

    pub fn violations(&self) -> &BTreeMap<Monitor, usize> {
        &self.first_violation
    }

    pub fn is_clean(&self) -> bool {
        self.first_violation.is_empty()
    }

    pub fn firm_unimodal_armed(&self) -> bool {
        self.firm_unimodal_armed
    }

    fn flag(&mut self, m: Monitor, step: usize) {
        self.first_violation.entry(m).or_insert(step);
    }
}

impl StepObserver for MonitorSet {
    fn on_step(&mut self, rec: &StepRecord<'_>) {
        let t = rec.step;
        let (xf, xw) = (&rec.prev.firm, &rec.prev.worker);
        let (nf, nw) = (&rec.next.firm, &rec.next.worker);

        if !is_non_increasing(nw) {
            self.flag(Monitor::WorkerMonotone, t);
        }
        if self.firm_unimodal_armed && !is_unimodal(nf) {
            self.flag(Monitor::FirmUnimodal, t);
        }
        for (v, x) in [(rec.input_f, nf), (rec.input_w, nw)] {
            let (diff_ok, order_ok) = projection_identities(v, x);
            if !diff_ok {
                self.flag(Monitor::MassDifference, t);
            }
            if !order_ok {
                self.flag(Monitor::OrderPreservation, t);
            }
        }

        // The transition rules need iterate t itself to carry the structure.
        if t < 2 {
            return;
        }
        let (Ok(wm), Ok(fm), Ok(wm_next)) = (w_max(xw, SUPPORT_TOL), f_min(xf, SUPPORT_TOL), w_max(nw, SUPPORT_TOL))
        else {
            return;
        };
        if wm_next > wm {
            self.flag(Monitor::WmaxNonIncreasing, t);
        }
        if wm <= fm {
            let moved = xw.iter().zip(nw).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if moved > SHAPE_TOL {
                self.flag(Monitor::WorkerFrozen, t);
            }
        } else {
            // Offers strictly between 0 and w_max are what make lower thresholds
            // strictly better; mass only at offer 0 leaves the worker indifferent.
            let pressure: f64 = xf[1..wm].iter().sum();
            if pressure > SUPPORT_TOL && !(nw[wm] < xw[wm] || nw[wm] <= SUPPORT_TOL) {
                self.flag(Monitor::WorkerMaxDecreases, t);
            }
        }
    }
}

fn is_non_increasing(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[1] <= w[0] + SHAPE_TOL)
}

fn is_unimodal(x: &[f64]) -> bool {
    let mut descending = false;
    for w in x.windows(2) {
        if w[1] < w[0] - SHAPE_TOL {
            descending = true;
        } else if w[1] > w[0] + SHAPE_TOL && descending {
            return false;
        }
    }
    true
}

/// `(mass difference law, order preservation)` for output `x` of input `v`.
fn projection_identities(v: &[f64], x: &[f64]) -> (bool, bool) {
    let tol = IDENTITY_TOL * scale_of(v);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut min_support_input = f64::INFINITY;
    let mut max_zero_input = f64::NEG_INFINITY;
    for (&vi, &xi) in v.iter().zip(x) {
        if xi > 0.0 {
            lo = lo.min(xi - vi);
            hi = hi.max(xi - vi);
            min_support_input = min_support_input.min(vi);
        } else {
            max_zero_input = max_zero_input.max(vi);
        }
    }
    (hi - lo <= tol || lo > hi, max_zero_input <= min_support_input + tol)
}

/// One randomized ultimatum configuration of the audit.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditCase {
    pub index: usize,
    pub d: usize,
    pub eta: f64,
    pub init_f: Vec<f64>,
    pub init_w: Vec<f64>,
}

/// Draws case `index` of the audit seeded by `seed`. Each case has its own
/// stream, so any single case can be reproduced in isolation. Even-indexed
/// cases sort the worker's initial mixture into non-increasing order so that
/// the firm-unimodality monitor is armed for them.
pub fn draw_audit_case(seed: u64, index: usize, max_d: usize) -> AuditCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let d = rng.gen_range(3..=max_d.max(3));
    // gen::<f64>() is in [0, 1); flip it into (0, 1].
    let eta = 1.0 - rng.gen::<f64>();
    let mut mixture = |n: usize| {
        let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|r| r / total).collect::<Vec<_>>()
    };
    let init_f = mixture(d + 1);
    let mut init_w = mixture(d + 1);
    if index % 2 == 0 {
        init_w.sort_by(|a, b| b.total_cmp(a));
    }
    AuditCase { index, d, eta, init_f, init_w }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRun {
    pub case: AuditCase,
    pub converged_at: Option<usize>,
    pub firm_unimodal_armed: bool,
    pub violations: BTreeMap<Monitor, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub seed: u64,
    pub runs: Vec<AuditRun>,
}

impl AuditReport {
    /// `(case index, monitor, first violating step)` over all runs.
    pub fn violations(&self) -> Vec<(usize, Monitor, usize)> {
        self.runs.iter().flat_map(|r| r.violations.iter().map(move |(&m, &s)| (r.case.index, m, s))).collect()
    }

    pub fn is_clean(&self) -> bool {
        self.runs.iter().all(|r| r.violations.is_empty())
    }
}

/// Runs `n` random ultimatum configurations (`D` in `[3, 30]`, `eta` in `(0, 1]`,
/// random interior initial mixtures, zero references) with all monitors armed.
pub fn audit(n: usize, seed: u64, fault: Fault) -> Result<AuditReport> {
    let runs = (0..n)
        .into_par_iter()
        .map(|i| {
            let case = draw_audit_case(seed, i, 30);
            let grid = ActionGrid::new(case.d)?;
            let cfg = LearnerConfig::ultimatum(grid, case.eta);
            let mut monitors = MonitorSet::new(&case.init_w);
            let tr = run_dynamics_observed(&cfg, &case.init_f, &case.init_w, &mut monitors, fault)?;
            Ok(AuditRun {
                converged_at: tr.converged_at,
                firm_unimodal_armed: monitors.firm_unimodal_armed(),
                violations: monitors.first_violation,
                case,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AuditReport { seed, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_predicates() {
        assert!(is_non_increasing(&[0.5, 0.3, 0.3, 0.0]));
        assert!(!is_non_increasing(&[0.3, 0.5, 0.2]));
        assert!(is_unimodal(&[0.0, 0.2, 0.5, 0.3, 0.0]));
        assert!(is_unimodal(&[0.5, 0.5, 0.0]));
        assert!(!is_unimodal(&[0.4, 0.1, 0.5]));
    }

    #[test]
    fn projection_identities_on_known_projection() {
        // Projection of (0.5, 0.2, 0.2) is (16/30, 7/30, 7/30) scaled by eta = 1.
        let v = [0.5, 0.2, 0.2];
        let x = [16.0 / 30.0, 7.0 / 30.0, 7.0 / 30.0];
        assert_eq!(projection_identities(&v, &x), (true, true));
        assert!(!projection_identities(&v, &[0.6, 0.2, 0.2]).0);
        assert!(!projection_identities(&[0.0, 1.0], &[1.0, 0.0]).1);
    }

    #[test]
    fn audit_cases_are_reproducible() {
        let a = draw_audit_case(42, 7, 30);
        let b = draw_audit_case(42, 7, 30);
        assert_eq!(a, b);
        assert!((3..=30).contains(&a.d));
        assert!(a.eta > 0.0 && a.eta <= 1.0);
        assert!((a.init_f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_audit_is_clean() {
        let report = audit(5, 1, Fault::None).unwrap();
        assert!(report.is_clean(), "{:?}", report.violations());
    }

    #[test]
    fn skipped_projection_trips_worker_monotonicity() {
        let report = audit(5, 1, Fault::SkipWorkerProjection).unwrap();
        assert!(report.violations().iter().any(|&(_, m, _)| m == Monitor::WorkerMonotone));
    }

    #[test]
    fn empty_audit_passes() {
        assert!(audit(0, 42, Fault::None).unwrap().is_clean());
    }
}
