//! Certificates, structural checks, threat detection, the recurrence oracle
//! and runtime invariant monitors.

mod certificate;
mod monitors;
mod recurrence;
mod threats;

pub use certificate::{
    best_response_firm, best_response_worker, certify_epsilon_ne, certify_g1, certify_g2, check_offer_condition,
    continuous_br_gap, support_extremes, treeplex_best_response, utilities_g1, EquilibriumCertificate, PURE_TOL,
};
pub use monitors::{audit, draw_audit_case, AuditCase, AuditReport, AuditRun, Monitor, MonitorSet};
pub use recurrence::{
    classify_recurrence, iterate_recurrence, iterate_to_event, recurrence_closed_form, recurrence_params,
    RecurrenceOutcome, RecurrenceParams,
};
pub use threats::{detect_threats, ThreatReport, THREAT_TOL};

use crate::error::{Error, Result};

/// Masses at or below this count as zero when reading supports.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Largest index with mass above `tol` (the worker's `w_max`).
pub fn w_max(x: &[f64], tol: f64) -> Result<usize> {
    x.iter()
        .rposition(|&m| m > tol)
        .ok_or_else(|| Error::Structural(format!("no entry above support tolerance {tol:e}")))
}

/// Smallest index with mass above `tol` (the firm's `f_min`).
pub fn f_min(x: &[f64], tol: f64) -> Result<usize> {
    x.iter()
        .position(|&m| m > tol)
        .ok_or_else(|| Error::Structural(format!("no entry above support tolerance {tol:e}")))
}
