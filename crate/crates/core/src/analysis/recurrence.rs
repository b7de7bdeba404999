//! The coupled recurrence followed by the masses on `w_max = k/D` while the
//! firm mixes over `{(k-1)/D, k/D}`, its closed form and its outcome.
//!
//! ```text
//! w' = w - A (1 - f)
//! f' = f + B (w - C/B)
//! ```
//! with `A = eta (k-1) k / ((k+1) D)`, `B = eta (D-k+1) / (2D)`,
//! `C = eta / (2D)`, so that `C/B = 1/(D-k+1)`.

use crate::error::{Error, Result};

/// Zero tolerance on `alpha1_f` when classifying.
const ALPHA_ZERO: f64 = 1e-12;

/// Iteration cap of [`iterate_to_event`].
pub const EVENT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceParams {
    pub d: usize,
    pub eta: f64,
    pub k: usize,
    pub w0: f64,
    pub f0: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub c_w: f64,
    pub c_f: f64,
    pub alpha1_w: f64,
    pub alpha2_w: f64,
    pub alpha1_f: f64,
    pub alpha2_f: f64,
}

impl RecurrenceParams {
    /// The worker's threshold mass `C/B = 1/(D-k+1)`.
    pub fn floor(&self) -> f64 {
        1.0 / (self.d - self.k + 1) as f64
    }

    /// `sqrt(AB)`.
    pub fn root(&self) -> f64 {
        (self.a * self.b).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecurrenceOutcome {
    /// The worker's mass on `w_max` drops below `1/(D-k+1)`.
    Decreases,
    /// The firm's mass on `w_max` reaches 1 in finite time.
    ExactConvergence,
    /// The firm's mass tends to 1 without reaching it.
    AsymptoticConvergence,
}

/// Requires `D > 2`, `2 <= k <= D`, `0 < eta <= 1`, `1/(D-k+1) <= w0 <= 1` and
/// `0 <= f0 <= 1`.
pub fn recurrence_params(d: usize, eta: f64, k: usize, w0: f64, f0: f64) -> Result<RecurrenceParams> {
    if d <= 2 {
        return Err(Error::Domain(format!("need D > 2, got {d}")));
    }
    if !(2..=d).contains(&k) {
        return Err(Error::Domain(format!("need 2 <= k <= D, got k = {k}")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!("need 0 < eta <= 1, got {eta}")));
    }
    let floor = 1.0 / (d - k + 1) as f64;
    if !(w0 >= floor && w0 <= 1.0) {
        return Err(Error::Domain(format!("need {floor} <= w0 <= 1, got {w0}")));
    }
    if !(0.0..=1.0).contains(&f0) {
        return Err(Error::Domain(format!("need 0 <= f0 <= 1, got {f0}")));
    }
    let (df, kf) = (d as f64, k as f64);
    let a = eta * (kf - 1.0) * kf / ((kf + 1.0) * df);
    let b = eta * (df - kf + 1.0) / (2.0 * df);
    let c = eta / (2.0 * df);
    let c_w = w0 - floor;
    let c_f = 1.0 - f0;
    let s = (a * b).sqrt();
    let alpha1_w = 0.5 * (c_w - c_f / b) + (c_w - a * c_f) / (2.0 * s);
    let alpha2_w = 0.5 * (c_w - c_f / b) - (c_w - a * c_f) / (2.0 * s);
    let alpha1_f = 0.5 * (c_w / a - c_f) + (b * c_w - c_f) / (2.0 * s);
    let alpha2_f = 0.5 * (c_w / a - c_f) - (b * c_w - c_f) / (2.0 * s);
    Ok(RecurrenceParams { d, eta, k, w0, f0, a, b, c, c_w, c_f, alpha1_w, alpha2_w, alpha1_f, alpha2_f })
}

/// `(w_n, f_n)` from the closed form; `n = 0` returns the initial pair.
pub fn recurrence_closed_form(p: &RecurrenceParams, n: usize) -> (f64, f64) {
    if n == 0 {
        return (p.w0, p.f0);
    }
    let s = p.root();
    let up = s * (1.0 + s).powi(n as i32 - 1);
    let down = s * (1.0 - s).powi(n as i32 - 1);
    (p.alpha1_w * up - p.alpha2_w * down + p.floor(), p.alpha1_f * up - p.alpha2_f * down + 1.0)
}

/// `(w_n, f_n)` for `n = 0..=steps` by direct iteration.
pub fn iterate_recurrence(p: &RecurrenceParams, steps: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(steps + 1);
    let (mut w, mut f) = (p.w0, p.f0);
    out.push((w, f));
    for _ in 0..steps {
        (w, f) = (w - p.a * (1.0 - f), f + p.b * (w - p.floor()));
        out.push((w, f));
    }
    out
}

/// Outcome predicted by the sign of `alpha1_f`.
pub fn classify_recurrence(p: &RecurrenceParams) -> RecurrenceOutcome {
    if p.alpha1_f < -ALPHA_ZERO {
        RecurrenceOutcome::Decreases
    } else if p.alpha1_f > ALPHA_ZERO {
        RecurrenceOutcome::ExactConvergence
    } else {
        RecurrenceOutcome::AsymptoticConvergence
    }
}

/// Outcome found by iterating until `w < 1/(D-k+1)` or `f >= 1`; neither event
/// within [`EVENT_CAP`] steps (or starting at the fixed point) counts as
/// asymptotic. Returns the outcome and the step at which it was decided.
pub fn iterate_to_event(p: &RecurrenceParams) -> (RecurrenceOutcome, usize) {
    if p.c_w == 0.0 && p.c_f == 0.0 {
        return (RecurrenceOutcome::AsymptoticConvergence, 0);
    }
    let floor = p.floor();
    let (mut w, mut f) = (p.w0, p.f0);
    for n in 1..=EVENT_CAP {
        (w, f) = (w - p.a * (1.0 - f), f + p.b * (w - floor));
        if w < floor {
            return (RecurrenceOutcome::Decreases, n);
        }
        if f >= 1.0 {
            return (RecurrenceOutcome::ExactConvergence, n);
        }
    }
    (RecurrenceOutcome::AsymptoticConvergence, EVENT_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_by_substitution() {
        let p = recurrence_params(5, 0.5, 2, 0.5, 0.5).unwrap();
        assert!((p.a - 1.0 / 15.0).abs() < 1e-15);
        assert!((p.b - 0.2).abs() < 1e-15);
        assert!((p.c - 0.05).abs() < 1e-15);
        assert!((p.c_w - 0.25).abs() < 1e-15);
        assert!((p.c_f - 0.5).abs() < 1e-15);
        assert!((p.c / p.b - p.floor()).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_boundary() {
        let p = recurrence_params(5, 0.5, 3, 1.0 / 3.0, 1.0).unwrap();
        assert_eq!((p.c_w, p.c_f), (0.0, 0.0));
        assert_eq!([p.alpha1_w, p.alpha2_w, p.alpha1_f, p.alpha2_f], [0.0; 4]);
        for n in 0..20 {
            let (w, f) = recurrence_closed_form(&p, n);
            assert!((w - 1.0 / 3.0).abs() < 1e-15 && f == 1.0);
        }
        assert_eq!(classify_recurrence(&p), RecurrenceOutcome::AsymptoticConvergence);
        assert_eq!(iterate_to_event(&p).0, RecurrenceOutcome::AsymptoticConvergence);
    }

    #[test]
    fn closed_form_fits_iteration() {
        let p = recurrence_params(5, 0.5, 2, 0.5, 0.5).unwrap();
        let it = iterate_recurrence(&p, 50);
        for (n, &(w, f)) in it.iter().enumerate() {
            let (cw, cf) = recurrence_closed_form(&p, n);
            assert!((cw - w).abs() <= 1e-9 * w.abs().max(1.0), "n={n}");
            assert!((cf - f).abs() <= 1e-9 * f.abs().max(1.0), "n={n}");
        }
    }

    #[test]
    fn classification_cases() {
        let d = 5;
        let k = 3;
        let floor = 1.0 / (d - k + 1) as f64;
        let exact = recurrence_params(d, 0.5, k, 1.0, 1.0 - 1e-6).unwrap();
        assert_eq!(classify_recurrence(&exact), RecurrenceOutcome::ExactConvergence);
        assert_eq!(iterate_to_event(&exact).0, RecurrenceOutcome::ExactConvergence);
        let dec = recurrence_params(d, 0.5, k, floor + 1e-6, 0.0).unwrap();
        assert_eq!(classify_recurrence(&dec), RecurrenceOutcome::Decreases);
        assert_eq!(iterate_to_event(&dec).0, RecurrenceOutcome::Decreases);
    }

    #[test]
    fn alpha_signs_agree() {
        let p = recurrence_params(7, 0.3, 4, 0.6, 0.2).unwrap();
        assert_eq!(p.alpha1_w.signum(), p.alpha1_f.signum());
        assert!((p.alpha1_f - (p.b / p.a).sqrt() * p.alpha1_w).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(recurrence_params(5, 0.5, 1, 0.5, 0.5).is_err());
        assert!(recurrence_params(5, 0.5, 6, 0.5, 0.5).is_err());
        assert!(recurrence_params(5, 1.5, 2, 0.5, 0.5).is_err());
        assert!(recurrence_params(5, 0.5, 2, 0.1, 0.5).is_err());
        assert!(recurrence_params(2, 0.5, 2, 1.0, 0.5).is_err());
    }
}
