//! The meta-game over initial strategies: sweep every pair of initial
//! strategies, record the converged worker payoff, and solve the resulting
//! constant-sum matrix game.

use rayon::prelude::*;

use crate::analysis::{certify_epsilon_ne, detect_threats, utilities_g1, ThreatReport, THREAT_TOL};
use crate::error::{Error, Result};
use crate::games::{build_treeplex, Agent, SimplexPoint};
use crate::geometry::RealizationPlan;
use crate::learner::{run_dynamics, GameKind, LearnerConfig, Profile};

/// Tolerance of the "at least" comparisons in the summary proportions.
pub const PROPORTION_TOL: f64 = 1e-9;

/// One initial strategy on a sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitialStrategy {
    /// Ultimatum game: the pure action with this grid index.
    Pure(usize),
    /// Two-round firm: offer, then accept counters of at least `threshold`.
    FirmPlan { offer: usize, threshold: usize },
    /// Two-round worker: accept offers of at least `threshold`, else counter.
    WorkerPlan { threshold: usize, counter: usize },
    /// The uniform mixture (uniform plan in the two-round game).
    Uniform,
}

impl InitialStrategy {
    /// The strategy vector of `agent` under `cfg`.
    pub fn vector(&self, cfg: &LearnerConfig, agent: Agent) -> Result<Vec<f64>> {
        let n = cfg.grid.len();
        let check = |k: usize| {
            if k < n {
                Ok(())
            } else {
                Err(Error::Domain(format!("grid index {k} outside {n} actions")))
            }
        };
        match (cfg.two_round_game(), *self) {
            (None, InitialStrategy::Pure(k)) => {
                check(k)?;
                Ok(SimplexPoint::pure(n, k).into_vec())
            }
            (None, InitialStrategy::Uniform) => Ok(SimplexPoint::uniform(n).into_vec()),
            (Some(g), InitialStrategy::FirmPlan { offer, threshold }) if agent == Agent::Firm => {
                check(offer)?;
                check(threshold)?;
                Ok(g.firm_pure_plan(offer, threshold).into_vec())
            }
            (Some(g), InitialStrategy::WorkerPlan { threshold, counter }) if agent == Agent::Worker => {
                check(threshold)?;
                check(counter)?;
                Ok(g.worker_pure_plan(threshold, counter).into_vec())
            }
            (Some(g), InitialStrategy::Uniform) => Ok(build_treeplex(&g, agent).uniform_plan().into_vec()),
            (_, s) => Err(Error::Domain(format!("{s:?} is not a {} strategy of this game", agent.name()))),
        }
    }

    /// The worker's initial acceptance threshold as a grid index, if pure.
    pub fn worker_threshold(&self) -> Option<usize> {
        match *self {
            InitialStrategy::Pure(k) => Some(k),
            InitialStrategy::WorkerPlan { threshold, .. } => Some(threshold),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxes {
    /// Rows.
    pub firm: Vec<InitialStrategy>,
    /// Columns.
    pub worker: Vec<InitialStrategy>,
}

impl SweepAxes {
    /// Every pure initial strategy of both agents.
    pub fn pure(cfg: &LearnerConfig) -> Self {
        let n = cfg.grid.len();
        match cfg.game {
            GameKind::Ultimatum => SweepAxes {
                firm: (0..n).map(InitialStrategy::Pure).collect(),
                worker: (0..n).map(InitialStrategy::Pure).collect(),
            },
            GameKind::TwoRound { .. } => SweepAxes {
                firm: (0..n)
                    .flat_map(|offer| (0..n).map(move |threshold| InitialStrategy::FirmPlan { offer, threshold }))
                    .collect(),
                worker: (0..n)
                    .flat_map(|threshold| (0..n).map(move |counter| InitialStrategy::WorkerPlan { threshold, counter }))
                    .collect(),
            },
        }
    }

    /// Replaces one agent's axis with the single uniform mixture.
    pub fn with_uniform(mut self, agent: Agent) -> Self {
        match agent {
            Agent::Firm => self.firm = vec![InitialStrategy::Uniform],
            Agent::Worker => self.worker = vec![InitialStrategy::Uniform],
        }
        self
    }

    pub fn cell_count(&self) -> usize {
        self.firm.len() * self.worker.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellStatus {
    Converged,
    /// Hit `max_steps`; payoffs are those of the last iterate.
    MaxSteps,
    /// The run itself failed.
    Failed,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Converged => "converged",
            CellStatus::MaxSteps => "max_steps",
            CellStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
    pub status: CellStatus,
    pub u_w: f64,
    pub u_f: f64,
    pub eps: f64,
    pub converged_at: Option<usize>,
    pub steps: usize,
    pub threats: Option<ThreatReport>,
    /// Final profile; empty vectors for a failed cell.
    pub last: Profile,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axes: SweepAxes,
    /// Row-major, `axes.firm.len()` rows by `axes.worker.len()` columns.
    pub cells: Vec<Cell>,
}

impl SweepResult {
    pub fn rows(&self) -> usize {
        self.axes.firm.len()
    }

    pub fn cols(&self) -> usize {
        self.axes.worker.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.cells[row * self.cols() + col]
    }

    /// The worker-payoff matrix for the meta-game. Rows containing a cell that
    /// did not converge are an error unless `allow_partial`, in which case
    /// those rows are dropped. Returns the kept row indices and the matrix.
    pub fn payoff_matrix(&self, allow_partial: bool) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
        let mut kept = Vec::new();
        let mut m = Vec::new();
        for r in 0..self.rows() {
            let row: Vec<&Cell> = (0..self.cols()).map(|c| self.cell(r, c)).collect();
            if row.iter().any(|c| c.status != CellStatus::Converged) {
                if allow_partial {
                    continue;
                }
                return Err(Error::Domain(format!("row {r} has cells that did not converge")));
            }
            kept.push(r);
            m.push(row.iter().map(|c| c.u_w).collect());
        }
        if m.is_empty() {
            return Err(Error::Domain("no fully converged rows".into()));
        }
        Ok((kept, m))
    }
}

/// Runs the dynamics from every pair of initial strategies on the axes.
///
/// Cells run in parallel on the global rayon pool (or on a pool of `threads`
/// workers) and are stored by index, so the result does not depend on
/// scheduling.
pub fn sweep_initials(cfg: &LearnerConfig, axes: &SweepAxes, threads: Option<usize>) -> Result<SweepResult> {
    cfg.validate()?;
    if axes.firm.is_empty() || axes.worker.is_empty() {
        return Err(Error::Domain("sweep axes must be non-empty".into()));
    }
    let mut cfg = cfg.clone();
    cfg.keep_history = false;
    let cols = axes.worker.len();
    let job = || -> Vec<Cell> {
        (0..axes.cell_count()).into_par_iter().map(|i| run_cell(&cfg, axes, i / cols, i % cols)).collect()
    };
    let cells = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Domain(format!("cannot build thread pool: {e}")))?
            .install(job),
        None => job(),
    };
    Ok(SweepResult { axes: axes.clone(), cells })
}

fn run_cell(cfg: &LearnerConfig, axes: &SweepAxes, row: usize, col: usize) -> Cell {
    let failed = |e: Error| Cell {
        row,
        col,
        status: CellStatus::Failed,
        u_w: f64::NAN,
        u_f: f64::NAN,
        eps: f64::NAN,
        converged_at: None,
        steps: 0,
        threats: None,
        last: Profile { firm: Vec::new(), worker: Vec::new() },
        error: Some(e.to_string()),
    };
    let result = (|| -> Result<Cell> {
        let init_f = axes.firm[row].vector(cfg, Agent::Firm)?;
        let init_w = axes.worker[col].vector(cfg, Agent::Worker)?;
        let tr = run_dynamics(cfg, &init_f, &init_w)?;
        let cert = certify_epsilon_ne(&tr.last, cfg)?;
        let (u_f, u_w, threats) = match cfg.two_round_game() {
            None => {
                let (f, w) = utilities_g1(&tr.last.firm, &tr.last.worker, cfg.grid);
                (f, w, None)
            }
            Some(g) => {
                let (f, w) = g.expected_utilities(&tr.last.firm, &tr.last.worker);
                let r_f = RealizationPlan::new(&build_treeplex(&g, Agent::Firm), tr.last.firm.clone())?;
                let r_w = RealizationPlan::new(&build_treeplex(&g, Agent::Worker), tr.last.worker.clone())?;
                let report = detect_threats(&r_f, &r_w, &g, Some(&tr.input_f), THREAT_TOL)?;
                (f, w, Some(report))
            }
        };
        Ok(Cell {
            row,
            col,
            status: if tr.converged_at.is_some() { CellStatus::Converged } else { CellStatus::MaxSteps },
            u_w,
            u_f,
            eps: cert.eps,
            converged_at: tr.converged_at,
            steps: tr.steps,
            threats,
            last: tr.last,
            error: None,
        })
    })();
    result.unwrap_or_else(failed)
}

/// A mixed equilibrium of the meta-game. The firm picks rows and minimizes
/// `u_w`; the worker picks columns and maximizes it.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxSolution {
    /// Midpoint of the two security levels.
    pub value_w: f64,
    pub row_mix: Vec<f64>,
    pub col_mix: Vec<f64>,
    /// `upper - lower`.
    pub br_gap: f64,
    /// The worker's guaranteed payoff under `col_mix`.
    pub lower: f64,
    /// The most the worker can get against `row_mix`.
    pub upper: f64,
    pub iterations: usize,
}

/// Security levels `(lower, upper)` of a pair of mixtures.
pub fn security_levels(m: &[Vec<f64>], row_mix: &[f64], col_mix: &[f64]) -> (f64, f64) {
    let lower =
        m.iter().map(|row| row.iter().zip(col_mix).map(|(a, y)| a * y).sum::<f64>()).fold(f64::INFINITY, f64::min);
    let upper = (0..m[0].len())
        .map(|c| m.iter().zip(row_mix).map(|(row, x)| row[c] * x).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    (lower, upper)
}

/// Solves the matrix game by optimistic multiplicative weights in self-play,
/// stopping once the averaged mixtures certify a gap of at most `tol` or after
/// `max_iter` rounds. A pure saddle point is returned directly.
pub fn minimax_solve(m: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<MinimaxSolution> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || m.iter().any(|r| r.len() != cols) {
        return Err(Error::Structural("payoff matrix must be non-empty and rectangular".into()));
    }
    if m.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Domain("payoff matrix has non-finite entries".into()));
    }
    if let Some(sol) = pure_saddle(m) {
        return Ok(sol);
    }

    let lo = m.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = m.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = (hi - lo).max(1e-300);
    let step = 0.1 / range;

    let mut log_x = vec![0.0; rows];
    let mut log_y = vec![0.0; cols];
    let mut last_gx = vec![0.0; rows];
    let mut last_gy = vec![0.0; cols];
    let mut sum_x = vec![0.0; rows];
    let mut sum_y = vec![0.0; cols];
    let mut best: Option<MinimaxSolution> = None;

    for it in 1..=max_iter {
        let x = softmax(&log_x);
        let y = softmax(&log_y);
        for (s, v) in sum_x.iter_mut().zip(&x) {
            *s += v;
        }
        for (s, v) in sum_y.iter_mut().zip(&y) {
            *s += v;
        }
        // Loss to the firm of each row, gain to the worker of each column.
        let gx: Vec<f64> = m.iter().map(|row| row.iter().zip(&y).map(|(a, b)| a * b).sum()).collect();
        let gy: Vec<f64> = (0..cols).map(|c| m.iter().zip(&x).map(|(row, p)| row[c] * p).sum()).collect();
        for r in 0..rows {
            log_x[r] -= step * (2.0 * gx[r] - last_gx[r]);
        }
        for c in 0..cols {
            log_y[c] += step * (2.0 * gy[c] - last_gy[c]);
        }
        last_gx = gx;
        last_gy = gy;

        if it % 50 == 0 || it == max_iter {
            // Both the running average and the last iterate are candidates.
            let ax: Vec<f64> = sum_x.iter().map(|s| s / it as f64).collect();
            let ay: Vec<f64> = sum_y.iter().map(|s| s / it as f64).collect();
            for (cx, cy) in [(ax, ay), (softmax(&log_x), softmax(&log_y))] {
                let (lower, upper) = security_levels(m, &cx, &cy);
                let gap = upper - lower;
                if best.as_ref().map_or(true, |b| gap < b.br_gap) {
                    best = Some(MinimaxSolution {
                        value_w: 0.5 * (lower + upper),
                        row_mix: cx,
                        col_mix: cy,
                        br_gap: gap,
                        lower,
                        upper,
                        iterations: it,
                    });
                }
            }
            if best.as_ref().is_some_and(|b| b.br_gap <= tol) {
                break;
            }
        }
    }
    best.ok_or_else(|| Error::Domain("minimax solver needs at least one iteration".into()))
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// An entry that is the largest in its row and the smallest in its column.
fn pure_saddle(m: &[Vec<f64>]) -> Option<MinimaxSolution> {
    let (rows, cols) = (m.len(), m[0].len());
    for r in 0..rows {
        let row_max = m[r].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for c in 0..cols {
            if m[r][c] == row_max && (0..rows).all(|q| m[q][c] >= m[r][c]) {
                let mut row_mix = vec![0.0; rows];
                let mut col_mix = vec![0.0; cols];
                row_mix[r] = 1.0;
                col_mix[c] = 1.0;
                return Some(MinimaxSolution {
                    value_w: m[r][c],
                    row_mix,
                    col_mix,
                    br_gap: 0.0,
                    lower: m[r][c],
                    upper: m[r][c],
                    iterations: 0,
                });
            }
        }
    }
    None
}

/// Table-style statistics of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub min_uw: f64,
    pub max_uw: f64,
    /// Share of cells whose `u_w` is at least the worker's initial threshold.
    pub prop_ge_init: f64,
    /// Share of cells whose `u_w` is at least the worker's reference action;
    /// `None` for a zero reference.
    pub prop_ge_ref: Option<f64>,
}

/// Summarizes the cells that produced a profile. `reference_w` is the value of
/// the worker's pure reference action, if any. Comparisons include ties up to
/// [`PROPORTION_TOL`]. Cells on a worker axis without a pure threshold are
/// left out of `prop_ge_init`.
pub fn summarize(
    sweep: &SweepResult,
    threshold_value: impl Fn(usize) -> f64,
    reference_w: Option<f64>,
) -> Result<SweepSummary> {
    let cells: Vec<&Cell> = sweep.cells.iter().filter(|c| c.status != CellStatus::Failed).collect();
    if cells.is_empty() {
        return Err(Error::Domain("sweep has no successful cells".into()));
    }
    let min_uw = cells.iter().map(|c| c.u_w).fold(f64::INFINITY, f64::min);
    let max_uw = cells.iter().map(|c| c.u_w).fold(f64::NEG_INFINITY, f64::max);
    let with_init: Vec<(f64, f64)> = cells
        .iter()
        .filter_map(|c| sweep.axes.worker[c.col].worker_threshold().map(|k| (c.u_w, threshold_value(k))))
        .collect();
    let prop_ge_init = if with_init.is_empty() {
        f64::NAN
    } else {
        with_init.iter().filter(|(u, t)| *u >= t - PROPORTION_TOL).count() as f64 / with_init.len() as f64
    };
    let prop_ge_ref =
        reference_w.map(|r| cells.iter().filter(|c| c.u_w >= r - PROPORTION_TOL).count() as f64 / cells.len() as f64);
    Ok(SweepSummary { min_uw, max_uw, prop_ge_init, prop_ge_ref })
}
