//! Best responses and epsilon-equilibrium certificates.

use super::{f_min, w_max, SUPPORT_TOL};
use crate::error::{Error, Result};
use crate::games::{build_treeplex, expected_feedback_g2, ActionGrid, Agent, SimplexPoint, TwoRoundGame};
use crate::geometry::{RealizationPlan, Treeplex};
use crate::learner::{GameKind, LearnerConfig, Profile};

/// A firm within this distance of a vertex counts as pure for the structural check.
pub const PURE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumCertificate {
    /// `max(gap_f, gap_w)`.
    pub eps: f64,
    pub gap_f: f64,
    pub gap_w: f64,
    /// Best-response offer (G2: first-round offer).
    pub br_f: usize,
    /// Best-response threshold (G2: lowest offer the best response accepts,
    /// or `D` if it accepts none).
    pub br_w: usize,
    /// The ultimatum-game NE condition holds at a near-pure firm. Always false
    /// for the two-round game.
    pub structural_ne: bool,
}

/// Firm best response: the offer maximizing `P(x_w <= a) (1 - a)`, lowest on ties.
pub fn best_response_firm(x_w: &SimplexPoint, grid: ActionGrid) -> (usize, f64) {
    let mut head = 0.0;
    let mut best = (0, f64::NEG_INFINITY);
    for (k, m) in x_w.mass().iter().enumerate().take(grid.len()) {
        head += m;
        let value = head * (1.0 - grid.action(k));
        if value > best.1 {
            best = (k, value);
        }
    }
    best
}

/// Worker best response. Threshold 0 accepts every offer and so attains
/// `sum_a x_f(a) a`; it is returned as the canonical member of the best-response set.
pub fn best_response_worker(x_f: &SimplexPoint, grid: ActionGrid) -> (usize, f64) {
    let value = x_f.mass().iter().enumerate().map(|(k, m)| m * grid.action(k)).sum();
    (0, value)
}

/// Expected utilities `(u_f, u_w)` of a mixed ultimatum profile.
pub fn utilities_g1(x_f: &[f64], x_w: &[f64], grid: ActionGrid) -> (f64, f64) {
    let mut head = 0.0;
    let (mut uf, mut uw) = (0.0, 0.0);
    for k in 0..grid.len() {
        head += x_w[k];
        let a = grid.action(k);
        uf += x_f[k] * head * (1.0 - a);
        uw += x_f[k] * head * a;
    }
    (uf, uw)
}

/// The mixed-NE condition for a pure offer `a_f`: the worker's largest
/// supported threshold equals `a_f` and no lower offer pays the firm more,
/// i.e. `(1 - a_f) >= (1 - a) P(x_w <= a)` for every `a < a_f`.
pub fn check_offer_condition(a_f: usize, x_w: &SimplexPoint, grid: ActionGrid) -> bool {
    match w_max(x_w.mass(), SUPPORT_TOL) {
        Ok(k) if k == a_f => {}
        _ => return false,
    }
    let keep = 1.0 - grid.action(a_f);
    let mut head = 0.0;
    for k in 0..a_f {
        head += x_w.mass()[k];
        if (1.0 - grid.action(k)) * head > keep + 1e-12 {
            return false;
        }
    }
    true
}

/// Certificate for an ultimatum profile.
pub fn certify_g1(x_f: &SimplexPoint, x_w: &SimplexPoint, grid: ActionGrid) -> Result<EquilibriumCertificate> {
    if x_f.len() != grid.len() || x_w.len() != grid.len() {
        return Err(Error::Structural(format!("strategies must have {} entries", grid.len())));
    }
    let (uf, uw) = utilities_g1(x_f.mass(), x_w.mass(), grid);
    let (br_f, vf) = best_response_firm(x_w, grid);
    let (br_w, vw) = best_response_worker(x_f, grid);
    let gap_f = (vf - uf).max(0.0);
    let gap_w = (vw - uw).max(0.0);
    let (top, top_mass) =
        x_f.mass()
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, m)| if m > acc.1 { (k, m) } else { acc });
    let structural_ne = top_mass >= 1.0 - PURE_TOL && check_offer_condition(top, x_w, grid);
    Ok(EquilibriumCertificate { eps: gap_f.max(gap_w), gap_f, gap_w, br_f, br_w, structural_ne })
}

/// Best pure plan against a fixed utility vector `g` on the treeplex `t`, by
/// backward induction. Returns the value and the plan; ties go to the
/// lowest-indexed child.
pub fn treeplex_best_response(t: &Treeplex, g: &[f64]) -> (f64, Vec<f64>) {
    let n = t.len();
    let mut value = g.to_vec();
    let mut choice = vec![0usize; t.infosets().len()];
    let order = t.topological_order();
    // Children of an infoset are settled before the infoset itself.
    let mut best = vec![0.0; t.infosets().len()];
    for &i in order.iter().rev() {
        let info = &t.infosets()[i];
        let mut arg = info.children[0];
        for &c in &info.children {
            let vc = value[c] + t.child_infosets(c).iter().map(|&j| best[j]).sum::<f64>();
            let va = value[arg] + t.child_infosets(arg).iter().map(|&j| best[j]).sum::<f64>();
            if vc > va {
                arg = c;
            }
        }
        best[i] = value[arg] + t.child_infosets(arg).iter().map(|&j| best[j]).sum::<f64>();
        choice[i] = arg;
    }
    let root = t.root();
    value[root] = g[root] + t.child_infosets(root).iter().map(|&j| best[j]).sum::<f64>();

    let mut plan = vec![0.0; n];
    plan[root] = 1.0;
    for &i in order {
        let parent = t.infosets()[i].parent;
        plan[choice[i]] = plan[parent];
    }
    (value[root], plan)
}

/// Certificate for a two-round profile: each gap is the best pure plan's
/// value against the opponent minus the current expected utility.
pub fn certify_g2(r_f: &RealizationPlan, r_w: &RealizationPlan, game: &TwoRoundGame) -> Result<EquilibriumCertificate> {
    let tf = build_treeplex(game, Agent::Firm);
    let tw = build_treeplex(game, Agent::Worker);
    let gf = expected_feedback_g2(Agent::Firm, r_w, game)?;
    let gw = expected_feedback_g2(Agent::Worker, r_f, game)?;
    let (uf, uw) = game.expected_utilities(r_f.values(), r_w.values());
    let (vf, pf) = treeplex_best_response(&tf, &gf.values);
    let (vw, pw) = treeplex_best_response(&tw, &gw.values);
    let gap_f = (vf - uf).max(0.0);
    let gap_w = (vw - uw).max(0.0);
    let m = game.grid().len();
    let br_f = (0..m).find(|&a| pf[game.firm_offer(a)] > 0.5).unwrap_or(0);
    let br_w = (0..m).find(|&a| pw[game.worker_accept(a)] > 0.5).unwrap_or(game.grid().d());
    Ok(EquilibriumCertificate { eps: gap_f.max(gap_w), gap_f, gap_w, br_f, br_w, structural_ne: false })
}

/// Dispatches on the configured game.
pub fn certify_epsilon_ne(profile: &Profile, cfg: &LearnerConfig) -> Result<EquilibriumCertificate> {
    match cfg.game {
        GameKind::Ultimatum => {
            let x_f = SimplexPoint::new(profile.firm.clone())?;
            let x_w = SimplexPoint::new(profile.worker.clone())?;
            certify_g1(&x_f, &x_w, cfg.grid)
        }
        GameKind::TwoRound { delta } => {
            let game = TwoRoundGame::new(cfg.grid, delta)?;
            let r_f = RealizationPlan::new(&build_treeplex(&game, Agent::Firm), profile.firm.clone())?;
            let r_w = RealizationPlan::new(&build_treeplex(&game, Agent::Worker), profile.worker.clone())?;
            certify_g2(&r_f, &r_w, &game)
        }
    }
}

/// Best-response gap of an ultimatum profile against pure deviations on the
/// grid refined `refinement` times. Coarse action `k` sits at fine index
/// `k * refinement`.
pub fn continuous_br_gap(x_f: &SimplexPoint, x_w: &SimplexPoint, grid: ActionGrid, refinement: usize) -> Result<f64> {
    if refinement == 0 {
        return Err(Error::Domain("refinement must be positive".into()));
    }
    if x_f.len() != grid.len() || x_w.len() != grid.len() {
        return Err(Error::Structural(format!("strategies must have {} entries", grid.len())));
    }
    let fine = grid.d() * refinement;
    let at = |j: usize| j as f64 / fine as f64;
    let (uf, uw) = utilities_g1(x_f.mass(), x_w.mass(), grid);

    let mut best_f = f64::NEG_INFINITY;
    let mut head = 0.0;
    for j in 0..=fine {
        if j % refinement == 0 {
            head += x_w.mass()[j / refinement];
        }
        best_f = best_f.max(head * (1.0 - at(j)));
    }
    let mut best_w = f64::NEG_INFINITY;
    let mut tail = 0.0;
    for j in (0..=fine).rev() {
        if j % refinement == 0 {
            let k = j / refinement;
            tail += x_f.mass()[k] * grid.action(k);
        }
        best_w = best_w.max(tail);
    }
    Ok((best_f - uf).max(best_w - uw).max(0.0))
}

/// `(w_max, f_min)` of an ultimatum profile.
pub fn support_extremes(x_f: &[f64], x_w: &[f64], tol: f64) -> Result<(usize, usize)> {
    Ok((w_max(x_w, tol)?, f_min(x_f, tol)?))
}
