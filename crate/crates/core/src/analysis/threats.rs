//! Credible and non-credible threats in converged two-round profiles.

use crate::error::{Error, Result};
use crate::games::{build_treeplex, Agent, TwoRoundGame};
use crate::geometry::{behavioral_from_plan, behavioral_with_limit, LocalStrategy, RealizationPlan};

/// Default probability tolerance for reading behavioral strategies.
pub const THREAT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ThreatReport {
    /// First-round offer index with realization at least `1 - tol`, if any.
    pub equilibrium_offer: Option<usize>,
    pub worker_accepts_eq: bool,
    /// `(offer, counter)` witnessing a credible worker threat.
    pub credible_worker_threat: Option<(usize, usize)>,
    /// The firm's reject probability on the counter `1/D` after the
    /// equilibrium offer, when that constitutes a non-credible threat.
    pub noncredible_firm_threat: Option<f64>,
}

impl ThreatReport {
    pub fn credible(&self) -> bool {
        self.credible_worker_threat.is_some()
    }

    pub fn noncredible(&self) -> bool {
        self.noncredible_firm_threat.is_some()
    }

    pub fn status(&self) -> &'static str {
        if self.equilibrium_offer.is_some() {
            "ok"
        } else {
            "undefined-equilibrium-offer"
        }
    }
}

/// Reads threats off a two-round profile.
///
/// `firm_input` is the firm's last projection input. When given, firm
/// infosets that are unreachable under `r_f` are completed with the limit of
/// the projection rather than a uniform placeholder, which is what the learned
/// strategy would do there if the offer carried vanishing weight.
pub fn detect_threats(
    r_f: &RealizationPlan,
    r_w: &RealizationPlan,
    game: &TwoRoundGame,
    firm_input: Option<&[f64]>,
    tol: f64,
) -> Result<ThreatReport> {
    if !(tol > 0.0 && tol < 0.5) {
        return Err(Error::Domain(format!("threat tolerance must lie in (0, 0.5), got {tol}")));
    }
    let tf = build_treeplex(game, Agent::Firm);
    let tw = build_treeplex(game, Agent::Worker);
    if r_f.values().len() != tf.len() || r_w.values().len() != tw.len() {
        return Err(Error::Structural("plans do not match the game".into()));
    }
    let beh_f: Vec<LocalStrategy> = match firm_input {
        Some(v) if v.len() == tf.len() => behavioral_with_limit(r_f, &tf, v),
        Some(v) => return Err(Error::Structural(format!("firm input has {} entries, expected {}", v.len(), tf.len()))),
        None => behavioral_from_plan(r_f, &tf),
    };
    let beh_w = behavioral_from_plan(r_w, &tw);
    let grid = game.grid();
    let m = grid.len();
    let delta = game.delta();

    let eq = (0..m).find(|&a| r_f.values()[game.firm_offer(a)] >= 1.0 - tol);
    let Some(eq) = eq else {
        return Ok(ThreatReport {
            equilibrium_offer: None,
            worker_accepts_eq: false,
            credible_worker_threat: None,
            noncredible_firm_threat: None,
        });
    };

    // Worker infoset children are [accept, counter 0, ..., counter D].
    let accept = |a: usize| beh_w[game.worker_response_infoset(a)].probs[0];
    let firm_accepts = |a: usize, b: usize| beh_f[game.firm_response_infoset(a, b)].probs[0];
    let worker_accepts_eq = accept(eq) >= 1.0 - tol;

    let mut credible = None;
    for a in (0..eq).rev() {
        let reject = 1.0 - accept(a);
        if reject <= tol {
            continue;
        }
        let probs = &beh_w[game.worker_response_infoset(a)].probs;
        let value = |b: usize| delta * (1.0 - grid.action(b)) * firm_accepts(a, b);
        let best = (0..m).map(value).fold(f64::NEG_INFINITY, f64::max);
        let support: Vec<usize> = (0..m).filter(|&b| probs[1 + b] / reject > tol).collect();
        if !support.is_empty() && support.iter().all(|&b| value(b) >= best - tol) {
            let witness =
                support.iter().copied().max_by(|&x, &y| probs[1 + x].total_cmp(&probs[1 + y]).then(y.cmp(&x)));
            credible = witness.map(|b| (a, b));
            break;
        }
    }

    let reject_min = 1.0 - firm_accepts(eq, 1);
    let noncredible = (worker_accepts_eq && delta * grid.action(grid.d() - 1) > grid.action(eq) && reject_min > tol)
        .then_some(reject_min);

    Ok(ThreatReport {
        equilibrium_offer: Some(eq),
        worker_accepts_eq,
        credible_worker_threat: credible,
        noncredible_firm_threat: noncredible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::ActionGrid;

    fn game() -> TwoRoundGame {
        TwoRoundGame::new(ActionGrid::new(5).unwrap(), 0.9).unwrap()
    }

    #[test]
    fn no_rejections_no_threats() {
        let g = game();
        let r = detect_threats(&g.firm_pure_plan(2, 0), &g.worker_pure_plan(0, 0), &g, None, THREAT_TOL).unwrap();
        assert_eq!(r.equilibrium_offer, Some(2));
        assert!(r.worker_accepts_eq);
        assert!(!r.credible() && !r.noncredible());
    }

    #[test]
    fn firm_rejecting_low_counter_is_noncredible() {
        // Offer 0.6, reject every counter below 0.4; the worker accepts 0.6.
        let g = game();
        let r = detect_threats(&g.firm_pure_plan(3, 2), &g.worker_pure_plan(3, 0), &g, None, THREAT_TOL).unwrap();
        assert!(r.worker_accepts_eq);
        assert_eq!(r.noncredible_firm_threat, Some(1.0));
    }

    #[test]
    fn noncredible_needs_valuable_counter() {
        // delta (D-1)/D = 0.72 is below the offer 0.8, so rejecting 1/D is no threat.
        let g = game();
        let r = detect_threats(&g.firm_pure_plan(4, 2), &g.worker_pure_plan(4, 0), &g, None, THREAT_TOL).unwrap();
        assert!(!r.noncredible());
    }

    #[test]
    fn worker_rejection_with_best_counter_is_credible() {
        // Firm offers 0.8 and, in the subtree after 0.6, accepts counters of
        // at least 0.2. The worker rejects 0.6 and counters 0.2, its best
        // counter there (0.72 beats 0.54 for 0.4; 0.9 for 0 is rejected).
        let g = game();
        let r_f = g.firm_pure_plan(4, 0).into_vec();
        let tf = build_treeplex(&g, Agent::Firm);
        let mut input = vec![0.0; tf.len()];
        for b in 0..6 {
            input[g.firm_accept(3, b)] = if b >= 1 { 1.0 } else { -1.0 };
        }
        let r_f = RealizationPlan::new(&tf, r_f).unwrap();
        let r_w = g.worker_pure_plan(4, 1);
        let r = detect_threats(&r_f, &r_w, &g, Some(&input), THREAT_TOL).unwrap();
        assert_eq!(r.equilibrium_offer, Some(4));
        assert_eq!(r.credible_worker_threat, Some((3, 1)));
        // A uniform placeholder makes counter 0 better (0.45 vs 0.36), so no threat.
        let r = detect_threats(&r_f, &r_w, &g, None, THREAT_TOL).unwrap();
        assert!(!r.credible());
    }

    #[test]
    fn undefined_equilibrium_offer() {
        let g = game();
        let tf = build_treeplex(&g, Agent::Firm);
        let r = detect_threats(&tf.uniform_plan(), &g.worker_pure_plan(0, 0), &g, None, THREAT_TOL).unwrap();
        assert_eq!(r.status(), "undefined-equilibrium-offer");
        assert!(!r.credible() && !r.noncredible());
    }
}
