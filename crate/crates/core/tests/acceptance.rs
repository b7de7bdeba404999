//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion prints one line, pass or fail; exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use bargain_core::analysis::{
    audit, classify_recurrence, continuous_br_gap, draw_audit_case, recurrence_closed_form, recurrence_params,
    RecurrenceOutcome, THREAT_TOL,
};
use bargain_core::geometry::rational_from_f64;
use bargain_core::learner::{run_dynamics, run_dynamics_exact, Fault};
use bargain_core::metagame::{minimax_solve, summarize, sweep_initials, CellStatus, SweepAxes, SweepResult};
use bargain_core::{ActionGrid, Agent, LearnerConfig, RationalScalar, Reference, SimplexPoint, TwoRoundGame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const D1: usize = 30;
const ETA: f64 = 0.5;
const EPS: f64 = 1e-7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// One reference setting of the ultimatum sweep and the reported statistics.
struct ReportedRow {
    label: &'static str,
    reference: Option<(usize, usize)>,
    min: f64,
    max: f64,
    prop_init: f64,
    prop_ref: Option<f64>,
    minimax: f64,
}

const REPORTED: [ReportedRow; 3] = [
    ReportedRow {
        label: "(0,0)",
        reference: None,
        min: 0.1333,
        max: 0.3333,
        prop_init: 0.2258,
        prop_ref: None,
        minimax: 0.2,
    },
    ReportedRow {
        label: "(1/6,1/2)",
        reference: Some((5, 15)),
        min: 0.1667,
        max: 0.5,
        prop_init: 0.4662,
        prop_ref: Some(0.7721),
        minimax: 1.0 / 6.0,
    },
    ReportedRow {
        label: "(1/2,29/30)",
        reference: Some((15, 29)),
        min: 0.1333,
        max: 0.5,
        prop_init: 0.2997,
        prop_ref: Some(0.0),
        minimax: 0.2,
    },
];

fn g1_config(row: &ReportedRow) -> LearnerConfig {
    let cfg = LearnerConfig::ultimatum(ActionGrid::new(D1).unwrap(), ETA);
    match row.reference {
        Some((f, w)) => cfg.with_references(Reference::Pure(f), Reference::Pure(w)),
        None => cfg,
    }
}

fn g2_config(delta: f64) -> LearnerConfig {
    LearnerConfig::two_round(ActionGrid::new(5).unwrap(), ETA, delta)
}

/// Brute-force ultimatum payoffs of pure actions against a mixture.
fn g1_payoff(offer: f64, threshold: f64) -> (f64, f64) {
    if offer >= threshold - 1e-12 {
        (1.0 - offer, offer)
    } else {
        (0.0, 0.0)
    }
}

/// Epsilon of a ultimatum profile by enumerating every pure deviation.
fn g1_eps_oracle(x_f: &[f64], x_w: &[f64], d: usize) -> f64 {
    let a = |k: usize| k as f64 / d as f64;
    let n = d + 1;
    let mut uf = 0.0;
    let mut uw = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (pf, pw) = g1_payoff(a(i), a(j));
            uf += x_f[i] * x_w[j] * pf;
            uw += x_f[i] * x_w[j] * pw;
        }
    }
    let best_f = (0..n).map(|i| (0..n).map(|j| x_w[j] * g1_payoff(a(i), a(j)).0).sum::<f64>()).fold(f64::MIN, f64::max);
    let best_w = (0..n).map(|j| (0..n).map(|i| x_f[i] * g1_payoff(a(i), a(j)).1).sum::<f64>()).fold(f64::MIN, f64::max);
    (best_f - uf).max(best_w - uw).max(0.0)
}

/// Epsilon of a two-round profile by backward induction on the game tree,
/// reading probabilities straight off the sequence layout.
fn g2_eps_oracle(r_f: &[f64], r_w: &[f64], game: &TwoRoundGame) -> f64 {
    let m = game.grid().len();
    let a = |k: usize| game.grid().action(k);
    let delta = game.delta();
    let (uf, uw) = game.expected_utilities(r_f, r_w);
    // Firm: pick one offer; after each counter keep whichever of accept/reject pays more.
    let best_f = (0..m)
        .map(|o| {
            let accepted = r_w[game.worker_accept(o)] * (1.0 - a(o));
            let countered: f64 = (0..m).map(|b| r_w[game.worker_counter(o, b)] * (delta * a(b)).max(0.0)).sum();
            accepted + countered
        })
        .fold(f64::MIN, f64::max);
    // Worker: after each offer either accept or make the single best counter.
    let best_w: f64 = (0..m)
        .map(|o| {
            let accept = r_f[game.firm_offer(o)] * a(o);
            let counter = (0..m).map(|b| delta * (1.0 - a(b)) * r_f[game.firm_accept(o, b)]).fold(f64::MIN, f64::max);
            accept.max(counter)
        })
        .sum();
    (best_f - uf).max(best_w - uw).max(0.0)
}

fn converged(s: &SweepResult) -> usize {
    s.cells.iter().filter(|c| c.status == CellStatus::Converged).count()
}

fn criterion1(sweeps: &[SweepResult]) -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (row, sweep) in REPORTED.iter().zip(sweeps) {
        let reference = row.reference.map(|(_, w)| w as f64 / D1 as f64);
        let s = summarize(sweep, |k| k as f64 / D1 as f64, reference).unwrap();
        let min_ok = (s.min_uw - row.min).abs() <= 5e-5;
        let max_ok = (s.max_uw - row.max).abs() <= 5e-5;
        let init_ok = (s.prop_ge_init - row.prop_init).abs() <= 0.03;
        let ref_ok = match (s.prop_ge_ref, row.prop_ref) {
            (Some(a), Some(b)) => (a - b).abs() <= 0.03,
            (None, None) => true,
            _ => false,
        };
        let all = converged(sweep) == sweep.cells.len();
        pass &= min_ok && max_ok && init_ok && ref_ok && all;
        notes.push(format!(
            "{}: min {:.4}{} max {:.4}{} prop_init {:.4}{} prop_ref {}{}",
            row.label,
            s.min_uw,
            mark(min_ok),
            s.max_uw,
            mark(max_ok),
            s.prop_ge_init,
            mark(init_ok),
            s.prop_ge_ref.map_or("n/a".to_string(), |p| format!("{p:.4}")),
            mark(ref_ok),
        ));
    }
    outcome(pass, notes.join("; "))
}

fn mark(ok: bool) -> &'static str {
    if ok {
        ""
    } else {
        " (!)"
    }
}

fn criterion2(sweeps: &[SweepResult]) -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (row, sweep) in REPORTED.iter().zip(sweeps) {
        let (_, m) = sweep.payoff_matrix(false).unwrap();
        let sol = minimax_solve(&m, 1e-4, 200_000).unwrap();
        // Re-derive both security levels from the returned mixtures.
        let lower =
            m.iter().map(|r| r.iter().zip(&sol.col_mix).map(|(a, y)| a * y).sum::<f64>()).fold(f64::MAX, f64::min);
        let upper = (0..m[0].len())
            .map(|c| m.iter().zip(&sol.row_mix).map(|(r, x)| r[c] * x).sum::<f64>())
            .fold(f64::MIN, f64::max);
        let ok = upper - lower <= 1e-3 && lower - 1e-3 <= row.minimax && row.minimax <= upper + 1e-3;
        pass &= ok;
        notes.push(format!(
            "{}: value {:.5} in [{lower:.5}, {upper:.5}] want {:.4}{}",
            row.label,
            sol.value_w,
            row.minimax,
            mark(ok)
        ));
    }
    outcome(pass, notes.join("; "))
}

fn criterion3(g1: &[SweepResult], g2: &[(f64, SweepResult)]) -> Outcome {
    let mut worst1 = 0.0f64;
    let mut oracle_mismatch = 0usize;
    let mut count = 0usize;
    for sweep in g1 {
        for c in sweep.cells.iter().filter(|c| c.status == CellStatus::Converged) {
            let oracle = g1_eps_oracle(&c.last.firm, &c.last.worker, D1);
            if (oracle - c.eps).abs() > 1e-12 {
                oracle_mismatch += 1;
            }
            worst1 = worst1.max(c.eps.max(oracle));
            count += 1;
        }
    }
    let mut worst2 = 0.0f64;
    for (delta, sweep) in g2 {
        let game = TwoRoundGame::new(ActionGrid::new(5).unwrap(), *delta).unwrap();
        for c in sweep.cells.iter().filter(|c| c.status == CellStatus::Converged) {
            let oracle = g2_eps_oracle(&c.last.firm, &c.last.worker, &game);
            if (oracle - c.eps).abs() > 1e-12 {
                oracle_mismatch += 1;
            }
            worst2 = worst2.max(c.eps.max(oracle));
            count += 1;
        }
    }
    outcome(
        worst1 <= EPS && worst2 <= EPS && oracle_mismatch == 0,
        format!(
            "{count} converged cells; max eps g1 {worst1:.3e}, g2 {worst2:.3e}; oracle mismatches {oracle_mismatch}"
        ),
    )
}

fn criterion4() -> Outcome {
    let cfg = g2_config(0.9);
    let game = cfg.two_round_game().unwrap();
    let run = |offer, ft, wt, wc| {
        let f = game.firm_pure_plan(offer, ft).into_vec();
        let w = game.worker_pure_plan(wt, wc).into_vec();
        let tr = run_dynamics(&cfg, &f, &w).unwrap();
        let tf = bargain_core::games::build_treeplex(&game, Agent::Firm);
        let tw = bargain_core::games::build_treeplex(&game, Agent::Worker);
        let r_f = bargain_core::RealizationPlan::new(&tf, tr.last.firm.clone()).unwrap();
        let r_w = bargain_core::RealizationPlan::new(&tw, tr.last.worker.clone()).unwrap();
        let rep = bargain_core::analysis::detect_threats(&r_f, &r_w, &game, Some(&tr.input_f), THREAT_TOL).unwrap();
        (tr.converged_at, rep)
    };
    // Grid indices on D = 5: 0.6 is 3, 0.8 is 4, 0.2 is 1.
    let (c1, r1) = run(0, 0, 0, 0);
    let ok1 = c1.is_some()
        && r1.equilibrium_offer == Some(4)
        && r1.worker_accepts_eq
        && r1.credible_worker_threat.map(|(a, _)| a) == Some(3);
    let (c2, r2) = run(3, 0, 3, 1);
    let ok2 = c2.is_some() && r2.equilibrium_offer == Some(3) && r2.worker_accepts_eq && r2.noncredible();
    outcome(
        ok1 && ok2,
        format!(
            "profile 1: offer {:?} accepted {} credible {:?}{}; profile 2: offer {:?} accepted {} noncredible {:?}{}",
            r1.equilibrium_offer.map(|k| k as f64 / 5.0),
            r1.worker_accepts_eq,
            r1.credible_worker_threat,
            mark(ok1),
            r2.equilibrium_offer.map(|k| k as f64 / 5.0),
            r2.worker_accepts_eq,
            r2.noncredible_firm_threat,
            mark(ok2),
        ),
    )
}

fn criterion5(g2: &[(f64, SweepResult)]) -> Outcome {
    let max_at = |delta: f64| {
        let (_, s) = g2.iter().find(|(d, _)| *d == delta).unwrap();
        s.cells.iter().filter(|c| c.status != CellStatus::Failed).map(|c| c.u_w).fold(f64::MIN, f64::max)
    };
    let (lo, hi) = (max_at(0.1), max_at(0.9));
    outcome(lo <= hi, format!("max u_w at delta 0.1 = {lo:.6}, at delta 0.9 = {hi:.6}"))
}

fn criterion6() -> Outcome {
    let report = audit(100, 42, Fault::None).unwrap();
    let violations = report.violations();
    // Exact-versus-float on the first 20 drawn cases with D <= 10.
    let mut compared = 0;
    let mut worst = 0.0f64;
    let mut step_mismatch = 0;
    for i in 0..100 {
        if compared == 20 {
            break;
        }
        let case = draw_audit_case(42, i, 30);
        if case.d > 10 {
            continue;
        }
        let cfg = LearnerConfig::ultimatum(ActionGrid::new(case.d).unwrap(), case.eta);
        let float = run_dynamics(&cfg, &case.init_f, &case.init_w).unwrap();
        let exact_init = |x: &[f64]| {
            let v: Vec<RationalScalar> = x.iter().map(|&p| rational_from_f64(p)).collect();
            let total = v.iter().fold(RationalScalar::from_integer(0.into()), |acc, p| acc + p);
            v.into_iter().map(|p| p / &total).collect::<Vec<_>>()
        };
        let exact = run_dynamics_exact(&cfg, &exact_init(&case.init_f), &exact_init(&case.init_w)).unwrap().to_float();
        if exact.converged_at != float.converged_at {
            step_mismatch += 1;
        }
        for (a, b) in [(&exact.last.firm, &float.last.firm), (&exact.last.worker, &float.last.worker)] {
            for (x, y) in a.iter().zip(b.iter()) {
                worst = worst.max((x - y).abs());
            }
        }
        compared += 1;
    }
    let pass = violations.is_empty() && compared == 20 && worst <= 1e-12 && step_mismatch == 0;
    outcome(
        pass,
        format!(
            "{} runs, {} violations, {} converged; exact vs float on {compared} runs: max diff {worst:.2e}, step mismatches {step_mismatch}",
            report.runs.len(),
            violations.len(),
            report.runs.iter().filter(|r| r.converged_at.is_some()).count(),
        ),
    )
}

/// Iterates the recurrence until the worker mass drops below its floor or the
/// firm mass reaches one.
fn event_oracle(a: f64, b: f64, floor: f64, w0: f64, f0: f64) -> RecurrenceOutcome {
    if w0 == floor && f0 == 1.0 {
        return RecurrenceOutcome::AsymptoticConvergence;
    }
    let (mut w, mut f) = (w0, f0);
    for _ in 0..1_000_000 {
        let nw = w - a * (1.0 - f);
        let nf = f + b * w - b * floor;
        (w, f) = (nw, nf);
        if w < floor {
            return RecurrenceOutcome::Decreases;
        }
        if f >= 1.0 {
            return RecurrenceOutcome::ExactConvergence;
        }
    }
    RecurrenceOutcome::AsymptoticConvergence
}

fn criterion7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut fit_fail, mut class_fail, mut sign_fail) = (0, 0, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let d = rng.gen_range(3..=30usize);
        let k = rng.gen_range(2..=d);
        let eta = 1.0 - rng.gen::<f64>();
        let floor = 1.0 / (d - k + 1) as f64;
        let w0 = floor + (1.0 - floor) * rng.gen::<f64>();
        let f0 = rng.gen::<f64>();
        let p = recurrence_params(d, eta, k, w0, f0).unwrap();
        // Constants recomputed here rather than read back.
        let (df, kf) = (d as f64, k as f64);
        let a = eta * (kf - 1.0) * kf / ((kf + 1.0) * df);
        let b = eta * (df - kf + 1.0) / (2.0 * df);
        let (mut w, mut f) = (w0, f0);
        for n in 0..=100 {
            let (cw, cf) = recurrence_closed_form(&p, n);
            let err = ((cw - w).abs() / w.abs().max(1.0)).max((cf - f).abs() / f.abs().max(1.0));
            worst = worst.max(err);
            if err > 1e-9 {
                fit_fail += 1;
                break;
            }
            (w, f) = (w - a * (1.0 - f), f + b * (w - floor));
        }
        if classify_recurrence(&p) != event_oracle(a, b, floor, w0, f0) {
            class_fail += 1;
        }
        if p.alpha1_f.signum() != p.alpha1_w.signum() {
            sign_fail += 1;
        }
    }
    outcome(
        fit_fail == 0 && class_fail == 0 && sign_fail == 0,
        format!("1000 draws: closed-form misfits {fit_fail} (max rel err {worst:.2e}), class mismatches {class_fail}, sign mismatches {sign_fail}"),
    )
}

fn criterion8(g1: &[SweepResult]) -> Outcome {
    let grid = ActionGrid::new(D1).unwrap();
    let mut bad = 0;
    let mut n = 0;
    let mut worst = f64::MIN;
    for sweep in g1 {
        for c in sweep.cells.iter().filter(|c| c.status == CellStatus::Converged) {
            let x_f = SimplexPoint::new(c.last.firm.clone()).unwrap();
            let x_w = SimplexPoint::new(c.last.worker.clone()).unwrap();
            let fine = continuous_br_gap(&x_f, &x_w, grid, 10).unwrap();
            let excess = fine - c.eps;
            worst = worst.max(excess);
            if excess > 1e-12 {
                bad += 1;
            }
            n += 1;
        }
    }
    outcome(bad == 0 && n > 0, format!("{n} profiles, {bad} exceed coarse gap; max excess {worst:.3e}"))
}

fn criterion9(g1: &[SweepResult], g2: &[(f64, SweepResult)]) -> Outcome {
    let max_steps = |s: &SweepResult| s.cells.iter().filter_map(|c| c.converged_at).max().unwrap_or(0);
    let g1_all = g1.iter().all(|s| converged(s) == s.cells.len());
    let g2_all = g2.iter().all(|(_, s)| converged(s) == s.cells.len());
    let g1_max = g1.iter().map(max_steps).max().unwrap_or(0);
    let g2_max = g2.iter().map(|(_, s)| max_steps(s)).max().unwrap_or(0);
    let unconverged: usize = g1.iter().chain(g2.iter().map(|(_, s)| s)).map(|s| s.cells.len() - converged(s)).sum();
    outcome(
        g1_all && g2_all && g1_max <= 8000 && g2_max <= 15000,
        format!("slowest convergence g1 {g1_max} steps, g2 {g2_max} steps; {unconverged} runs did not converge"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let g1: Vec<SweepResult> = REPORTED
        .iter()
        .map(|row| {
            let cfg = g1_config(row);
            sweep_initials(&cfg, &SweepAxes::pure(&cfg), None).unwrap()
        })
        .collect();
    let g2: Vec<(f64, SweepResult)> = [0.1, 0.55, 0.9]
        .into_iter()
        .map(|delta| {
            let cfg = g2_config(delta);
            (delta, sweep_initials(&cfg, &SweepAxes::pure(&cfg), None).unwrap())
        })
        .collect();
    eprintln!("sweeps finished in {:.1?}", start.elapsed());

    let results = [
        ("1 ultimatum sweep statistics", criterion1(&g1)),
        ("2 meta-game values", criterion2(&g1)),
        ("3 epsilon-NE certification", criterion3(&g1, &g2)),
        ("4 threat reproduction", criterion4()),
        ("5 delta monotonicity", criterion5(&g2)),
        ("6 invariant audit", criterion6()),
        ("7 recurrence oracle", criterion7()),
        ("8 refined-grid gap", criterion8(&g1)),
        ("9 empirical convergence", criterion9(&g1, &g2)),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("criterion {name}: {} -- {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed ({:.1?})", results.len() - failed, results.len(), start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
