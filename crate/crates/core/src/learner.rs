//! Two-agent FTRL dynamics with a Euclidean regularizer and full feedback.
//!
//! Each step both agents read the opponent's current strategy, add its one-step
//! utility vector to their cumulative utility `U`, and move to the projection of
//! `alpha + eta * U` onto their strategy polytope. Updates are simultaneous.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::games::{
    build_treeplex, firm_feedback_g2_into, firm_feedback_into, worker_feedback_g2_into, worker_feedback_into,
    ActionGrid, Agent, TwoRoundGame, UtilityVector,
};
use crate::geometry::{
    project_simplex_exact, project_simplex_into, project_treeplex, project_treeplex_warm, rational_from_f64,
    rational_to_f64, RationalScalar, Treeplex,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GameKind {
    Ultimatum,
    TwoRound { delta: f64 },
}

/// Anchor of the regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    Zero,
    /// The vertex of grid action `k` (ultimatum game only).
    Pure(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arithmetic {
    Float,
    /// Arbitrary-precision rationals (ultimatum game only).
    ExactRational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub grid: ActionGrid,
    pub eta: f64,
    pub reference_f: Reference,
    pub reference_w: Reference,
    pub game: GameKind,
    pub conv_threshold: f64,
    pub max_steps: usize,
    pub arithmetic: Arithmetic,
    /// Keep every iterate, not only the last two.
    pub keep_history: bool,
}

impl LearnerConfig {
    /// Ultimatum game defaults: threshold `1e-7`, 8000 steps, zero references.
    pub fn ultimatum(grid: ActionGrid, eta: f64) -> Self {
        LearnerConfig {
            grid,
            eta,
            reference_f: Reference::Zero,
            reference_w: Reference::Zero,
            game: GameKind::Ultimatum,
            conv_threshold: 1e-7,
            max_steps: 8000,
            arithmetic: Arithmetic::Float,
            keep_history: false,
        }
    }

    /// Two-round game defaults: threshold `1e-6`, 15000 steps.
    pub fn two_round(grid: ActionGrid, eta: f64, delta: f64) -> Self {
        LearnerConfig {
            game: GameKind::TwoRound { delta },
            conv_threshold: 1e-6,
            max_steps: 15000,
            ..LearnerConfig::ultimatum(grid, eta)
        }
    }

    pub fn with_references(mut self, reference_f: Reference, reference_w: Reference) -> Self {
        self.reference_f = reference_f;
        self.reference_w = reference_w;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Domain(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.conv_threshold > 0.0) {
            return Err(Error::Domain(format!("conv_threshold must be positive, got {}", self.conv_threshold)));
        }
        if self.max_steps == 0 {
            return Err(Error::Domain("max_steps must be at least 1".into()));
        }
        for r in [self.reference_f, self.reference_w] {
            if let Reference::Pure(k) = r {
                if k >= self.grid.len() {
                    return Err(Error::Domain(format!("reference action {k} is off the grid")));
                }
            }
        }
        if let GameKind::TwoRound { delta } = self.game {
            TwoRoundGame::new(self.grid, delta)?;
            if self.arithmetic == Arithmetic::ExactRational {
                return Err(Error::Domain("exact arithmetic is only available for the ultimatum game".into()));
            }
            if self.reference_f != Reference::Zero || self.reference_w != Reference::Zero {
                return Err(Error::Domain("the two-round game only supports zero references".into()));
            }
        }
        Ok(())
    }

    pub fn two_round_game(&self) -> Option<TwoRoundGame> {
        match self.game {
            GameKind::TwoRound { delta } => TwoRoundGame::new(self.grid, delta).ok(),
            GameKind::Ultimatum => None,
        }
    }

    /// Strategy dimension of `agent` (sequence count in the two-round game).
    pub fn dimension(&self, agent: Agent) -> usize {
        match self.two_round_game() {
            Some(g) => g.sequence_count(agent),
            None => self.grid.len(),
        }
    }

    fn reference(&self, agent: Agent) -> Reference {
        match agent {
            Agent::Firm => self.reference_f,
            Agent::Worker => self.reference_w,
        }
    }
}

/// A strategy pair: simplex points in the ultimatum game, realization plans in
/// the two-round game.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub firm: Vec<f64>,
    pub worker: Vec<f64>,
}

impl Profile {
    pub fn get(&self, agent: Agent) -> &[f64] {
        match agent {
            Agent::Firm => &self.firm,
            Agent::Worker => &self.worker,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Every iterate starting from the initial profile, if history was requested.
    pub history: Vec<Profile>,
    /// Final and next-to-final iterates.
    pub last: Profile,
    pub previous: Profile,
    pub cum_util_f: UtilityVector,
    pub cum_util_w: UtilityVector,
    /// The last projection inputs `alpha + eta * U`.
    pub input_f: Vec<f64>,
    pub input_w: Vec<f64>,
    /// Number of updates performed.
    pub steps: usize,
    /// Update at which both agents moved by at most the threshold.
    pub converged_at: Option<usize>,
    /// Max-norm of the last change, over both agents.
    pub final_delta: f64,
}

/// What an observer sees after every update.
pub struct StepRecord<'a> {
    /// 1-based index of the update; `prev` is iterate `step`, `next` iterate `step + 1`.
    pub step: usize,
    pub prev: &'a Profile,
    pub next: &'a Profile,
    pub feedback_f: &'a [f64],
    pub feedback_w: &'a [f64],
    pub input_f: &'a [f64],
    pub input_w: &'a [f64],
}

pub trait StepObserver {
    fn on_step(&mut self, record: &StepRecord<'_>);
}

impl StepObserver for () {
    fn on_step(&mut self, _: &StepRecord<'_>) {}
}

/// Deliberate defects for negative-control tests of the monitors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    /// The worker skips its projection and keeps its previous iterate.
    SkipWorkerProjection,
}

/// True iff no entry moved by more than `threshold` (inclusive).
pub fn detect_convergence(prev: &[f64], next: &[f64], threshold: f64) -> Result<bool> {
    if prev.len() != next.len() {
        return Err(Error::Structural(format!("compared strategies of length {} and {}", prev.len(), next.len())));
    }
    Ok(max_change(prev, next) <= threshold)
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// One FTRL update from scratch: the projection of `alpha + eta * cum_util`.
pub fn ftrl_step(agent: Agent, cum_util: &UtilityVector, cfg: &LearnerConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if let Some(index) = cum_util.values.iter().position(|x| !x.is_finite()) {
        return Err(Error::NumericInput { index });
    }
    let n = cfg.dimension(agent);
    if cum_util.len() != n {
        return Err(Error::Structural(format!("utility vector has {} entries, expected {n}", cum_util.len())));
    }
    let v = projection_input(cfg.reference(agent), cfg.eta, &cum_util.values);
    match cfg.two_round_game() {
        None => {
            let mut out = vec![0.0; n];
            project_simplex_into(&v, &mut out, &mut Vec::new())?;
            Ok(out)
        }
        Some(g) => Ok(project_treeplex(&v, &build_treeplex(&g, agent))?.into_vec()),
    }
}

fn projection_input(reference: Reference, eta: f64, cum: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = cum.iter().map(|u| eta * u).collect();
    if let Reference::Pure(k) = reference {
        v[k] += 1.0;
    }
    v
}

fn check_initial(cfg: &LearnerConfig, agent: Agent, x: &[f64]) -> Result<()> {
    let n = cfg.dimension(agent);
    if x.len() != n {
        return Err(Error::Structural(format!(
            "initial {} strategy has {} entries, expected {n}",
            agent.name(),
            x.len()
        )));
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericInput { index });
    }
    let viol = match cfg.two_round_game() {
        None => (x.iter().sum::<f64>() - 1.0).abs(),
        Some(g) => build_treeplex(&g, agent).constraint_violation(x),
    };
    if viol > 1e-9 || x.iter().any(|&m| m < -1e-12) {
        return Err(Error::Domain(format!("initial {} strategy is not in its polytope", agent.name())));
    }
    Ok(())
}

/// Runs the dynamics until convergence or `max_steps` updates.
pub fn run_dynamics(cfg: &LearnerConfig, init_f: &[f64], init_w: &[f64]) -> Result<Trajectory> {
    run_dynamics_observed(cfg, init_f, init_w, &mut (), Fault::None)
}

/// [`run_dynamics`] with a per-step observer and an optional injected fault.
pub fn run_dynamics_observed(
    cfg: &LearnerConfig,
    init_f: &[f64],
    init_w: &[f64],
    observer: &mut dyn StepObserver,
    fault: Fault,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_initial(cfg, Agent::Firm, init_f)?;
    check_initial(cfg, Agent::Worker, init_w)?;
    if cfg.arithmetic == Arithmetic::ExactRational {
        let f: Vec<_> = init_f.iter().map(|&x| rational_from_f64(x)).collect();
        let w: Vec<_> = init_w.iter().map(|&x| rational_from_f64(x)).collect();
        return Ok(run_dynamics_exact(cfg, &f, &w)?.to_float());
    }

    let game = cfg.two_round_game();
    let trees: Option<(Treeplex, Treeplex)> =
        game.map(|g| (build_treeplex(&g, Agent::Firm), build_treeplex(&g, Agent::Worker)));
    let (nf, nw) = (cfg.dimension(Agent::Firm), cfg.dimension(Agent::Worker));

    let mut cur = Profile { firm: init_f.to_vec(), worker: init_w.to_vec() };
    let mut history = Vec::new();
    if cfg.keep_history {
        history.push(cur.clone());
    }
    let mut u_f = vec![0.0; nf];
    let mut u_w = vec![0.0; nw];
    let mut g_f = vec![0.0; nf];
    let mut g_w = vec![0.0; nw];
    let mut v_f = vec![0.0; nf];
    let mut v_w = vec![0.0; nw];
    let mut order = Vec::new();
    let mut previous = cur.clone();
    let mut converged_at = None;
    let mut final_delta = f64::INFINITY;
    let mut steps = 0;

    for step in 1..=cfg.max_steps {
        match &game {
            None => {
                firm_feedback_into(cfg.grid, &cur.worker, &mut g_f);
                worker_feedback_into(cfg.grid, &cur.firm, &mut g_w);
            }
            Some(g) => {
                firm_feedback_g2_into(g, &cur.worker, &mut g_f);
                worker_feedback_g2_into(g, &cur.firm, &mut g_w);
            }
        }
        for (u, g) in u_f.iter_mut().zip(&g_f) {
            *u += g;
        }
        for (u, g) in u_w.iter_mut().zip(&g_w) {
            *u += g;
        }
        fill_input(&mut v_f, cfg.reference_f, cfg.eta, &u_f);
        fill_input(&mut v_w, cfg.reference_w, cfg.eta, &u_w);

        let mut next = Profile { firm: vec![0.0; nf], worker: vec![0.0; nw] };
        match &trees {
            None => {
                project_simplex_into(&v_f, &mut next.firm, &mut order)?;
                project_simplex_into(&v_w, &mut next.worker, &mut order)?;
            }
            Some((tf, tw)) => {
                next.firm = project_treeplex_warm(&v_f, tf, &cur.firm)?.into_vec();
                next.worker = project_treeplex_warm(&v_w, tw, &cur.worker)?.into_vec();
            }
        }
        if fault == Fault::SkipWorkerProjection {
            next.worker.copy_from_slice(&cur.worker);
        }

        observer.on_step(&StepRecord {
            step,
            prev: &cur,
            next: &next,
            feedback_f: &g_f,
            feedback_w: &g_w,
            input_f: &v_f,
            input_w: &v_w,
        });

        final_delta = max_change(&cur.firm, &next.firm).max(max_change(&cur.worker, &next.worker));
        steps = step;
        if cfg.keep_history {
            history.push(next.clone());
        }
        previous = std::mem::replace(&mut cur, next);
        if final_delta <= cfg.conv_threshold {
            converged_at = Some(step);
            break;
        }
    }

    Ok(Trajectory {
        history,
        last: cur,
        previous,
        cum_util_f: UtilityVector { values: u_f },
        cum_util_w: UtilityVector { values: u_w },
        input_f: v_f,
        input_w: v_w,
        steps,
        converged_at,
        final_delta,
    })
}

fn fill_input(v: &mut [f64], reference: Reference, eta: f64, cum: &[f64]) {
    for (x, u) in v.iter_mut().zip(cum) {
        *x = eta * u;
    }
    if let Reference::Pure(k) = reference {
        v[k] += 1.0;
    }
}

/// A trajectory of the ultimatum dynamics in exact rational arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactTrajectory {
    /// Every iterate from the initial profile (only if history was requested).
    pub history: Vec<(Vec<RationalScalar>, Vec<RationalScalar>)>,
    pub last: (Vec<RationalScalar>, Vec<RationalScalar>),
    pub previous: (Vec<RationalScalar>, Vec<RationalScalar>),
    pub cum_util_f: Vec<RationalScalar>,
    pub cum_util_w: Vec<RationalScalar>,
    pub steps: usize,
    pub converged_at: Option<usize>,
    pub final_delta: RationalScalar,
}

impl ExactTrajectory {
    /// Rounds every stored value to the nearest double.
    pub fn to_float(&self) -> Trajectory {
        let conv = |v: &[RationalScalar]| v.iter().map(rational_to_f64).collect::<Vec<_>>();
        let prof = |p: &(Vec<RationalScalar>, Vec<RationalScalar>)| Profile { firm: conv(&p.0), worker: conv(&p.1) };
        Trajectory {
            history: self.history.iter().map(prof).collect(),
            last: prof(&self.last),
            previous: prof(&self.previous),
            cum_util_f: UtilityVector { values: conv(&self.cum_util_f) },
            cum_util_w: UtilityVector { values: conv(&self.cum_util_w) },
            input_f: Vec::new(),
            input_w: Vec::new(),
            steps: self.steps,
            converged_at: self.converged_at,
            final_delta: rational_to_f64(&self.final_delta),
        }
    }
}

/// Exact ultimatum dynamics. `eta` and the threshold are taken at their exact
/// binary values.
pub fn run_dynamics_exact(
    cfg: &LearnerConfig,
    init_f: &[RationalScalar],
    init_w: &[RationalScalar],
) -> Result<ExactTrajectory> {
    if cfg.game != GameKind::Ultimatum {
        return Err(Error::Domain("exact arithmetic is only available for the ultimatum game".into()));
    }
    let n = cfg.grid.len();
    if init_f.len() != n || init_w.len() != n {
        return Err(Error::Structural(format!("initial strategies must have {n} entries")));
    }
    let d = cfg.grid.d();
    let action = |k: usize| RationalScalar::new(BigInt::from(k), BigInt::from(d));
    let eta = rational_from_f64(cfg.eta);
    let thr = rational_from_f64(cfg.conv_threshold);
    let input = |reference: Reference, u: &[RationalScalar]| {
        let mut v: Vec<RationalScalar> = u.iter().map(|x| &eta * x).collect();
        if let Reference::Pure(k) = reference {
            v[k] += RationalScalar::from_integer(1.into());
        }
        v
    };

    let mut cur = (init_f.to_vec(), init_w.to_vec());
    let mut previous = cur.clone();
    let mut history = Vec::new();
    if cfg.keep_history {
        history.push(cur.clone());
    }
    let mut u_f = vec![RationalScalar::zero(); n];
    let mut u_w = vec![RationalScalar::zero(); n];
    let mut converged_at = None;
    let mut final_delta = RationalScalar::zero();
    let mut steps = 0;

    for step in 1..=cfg.max_steps {
        let mut head = RationalScalar::zero();
        for k in 0..n {
            head += &cur.1[k];
            u_f[k] += &head * (RationalScalar::from_integer(1.into()) - action(k));
        }
        let mut tail = RationalScalar::zero();
        for k in (0..n).rev() {
            tail += &cur.0[k] * action(k);
            u_w[k] += &tail;
        }
        let next = (
            project_simplex_exact(&input(cfg.reference_f, &u_f)),
            project_simplex_exact(&input(cfg.reference_w, &u_w)),
        );
        final_delta = cur
            .0
            .iter()
            .zip(&next.0)
            .chain(cur.1.iter().zip(&next.1))
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or_else(RationalScalar::zero);
        steps = step;
        if cfg.keep_history {
            history.push(next.clone());
        }
        previous = std::mem::replace(&mut cur, next);
        if final_delta <= thr {
            converged_at = Some(step);
            break;
        }
    }
    Ok(ExactTrajectory {
        history,
        last: cur,
        previous,
        cum_util_f: u_f,
        cum_util_w: u_w,
        steps,
        converged_at,
        final_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::SimplexPoint;

    fn grid(d: usize) -> ActionGrid {
        ActionGrid::new(d).unwrap()
    }

    #[test]
    fn zero_utility_zero_reference_is_uniform() {
        let cfg = LearnerConfig::ultimatum(grid(5), 0.5);
        let x = ftrl_step(Agent::Firm, &UtilityVector::zeros(6), &cfg).unwrap();
        assert!(x.iter().all(|&m| (m - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn zero_utility_pure_reference_is_pure() {
        let cfg = LearnerConfig::ultimatum(grid(5), 0.5).with_references(Reference::Pure(2), Reference::Zero);
        let x = ftrl_step(Agent::Firm, &UtilityVector::zeros(6), &cfg).unwrap();
        assert_eq!(x, SimplexPoint::pure(6, 2).into_vec());
    }

    #[test]
    fn step_matches_projection_example() {
        // Build a D = 2 grid directly; the example lives below the dynamics' D > 2 floor.
        let v = [0.5, 0.2, 0.2];
        let mut out = [0.0; 3];
        project_simplex_into(&v, &mut out, &mut Vec::new()).unwrap();
        assert!((out[0] - 16.0 / 30.0).abs() < 1e-15 && (out[1] - 7.0 / 30.0).abs() < 1e-15);
        // Same input through the learner with eta = 1 on a D = 3 grid padded by a very low entry.
        let cfg = LearnerConfig::ultimatum(grid(3), 1.0);
        let x = ftrl_step(Agent::Worker, &UtilityVector { values: vec![0.5, 0.2, 0.2, -5.0] }, &cfg).unwrap();
        assert!((x[0] - 16.0 / 30.0).abs() < 1e-15 && (x[2] - 7.0 / 30.0).abs() < 1e-15 && x[3] == 0.0);
    }

    #[test]
    fn convergence_check_is_inclusive() {
        assert!(detect_convergence(&[0.2, 0.8], &[0.2, 0.8], 1e-7).unwrap());
        let u = vec![1.0 / 6.0; 6];
        let p = SimplexPoint::pure(6, 0).into_vec();
        assert!(!detect_convergence(&u, &p, 1e-7).unwrap());
        assert!(detect_convergence(&[0.0, 1.0], &[0.25, 0.75], 0.25).unwrap());
        assert!(detect_convergence(&[0.0], &[0.0, 1.0], 0.1).is_err());
    }

    #[test]
    fn converged_endpoint_is_a_fixed_point() {
        let cfg = LearnerConfig::ultimatum(grid(5), 0.5);
        let u = vec![1.0 / 6.0; 6];
        let first = run_dynamics(&cfg, &u, &u).unwrap();
        assert!(first.converged_at.is_some());
        let again = run_dynamics(&cfg, &first.last.firm, &first.last.worker).unwrap();
        // Cumulative utility restarts from zero, so the first iterates leave the
        // endpoint before the dynamics return to it.
        let c = again.converged_at.expect("restart converges");
        assert!(c <= 50, "restart took {c} steps");
        for (x, y) in
            first.last.firm.iter().chain(&first.last.worker).zip(again.last.firm.iter().chain(&again.last.worker))
        {
            assert!((x - y).abs() <= cfg.conv_threshold);
        }
    }

    #[test]
    fn exact_mode_requires_ultimatum() {
        let mut cfg = LearnerConfig::two_round(grid(5), 0.5, 0.9);
        cfg.arithmetic = Arithmetic::ExactRational;
        assert!(cfg.validate().is_err());
        let cfg = LearnerConfig::two_round(grid(5), 0.5, 0.9).with_references(Reference::Pure(1), Reference::Zero);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn exact_and_float_agree_on_short_run() {
        let mut cfg = LearnerConfig::ultimatum(grid(4), 0.5);
        cfg.max_steps = 40;
        let f0 = vec![0.5, 0.25, 0.125, 0.125, 0.0];
        let w0 = vec![0.0, 0.5, 0.0, 0.5, 0.0];
        let float = run_dynamics(&cfg, &f0, &w0).unwrap();
        cfg.arithmetic = Arithmetic::ExactRational;
        let exact = run_dynamics(&cfg, &f0, &w0).unwrap();
        assert_eq!(float.steps, exact.steps);
        for (a, b) in
            float.last.firm.iter().zip(&exact.last.firm).chain(float.last.worker.iter().zip(&exact.last.worker))
        {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}
