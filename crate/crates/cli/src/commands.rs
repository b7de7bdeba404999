//! The subcommands. Each returns its process exit code or a [`Failure`].

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use bargain_core::analysis::{
    audit, certify_epsilon_ne, classify_recurrence, draw_audit_case, iterate_recurrence, iterate_to_event,
    recurrence_closed_form, recurrence_params, utilities_g1, Monitor, RecurrenceOutcome,
};
use bargain_core::learner::{run_dynamics, Fault};
use bargain_core::metagame::{minimax_solve, summarize, sweep_initials, CellStatus, InitialStrategy};
use bargain_core::{Agent, Reference};

use crate::config::{format_strategy, parse_strategy, ExperimentConfig};
use crate::output::{fmt_real, read_heatmap, write_summary, write_sweep_heatmap, write_trajectory, TrajectoryRow};

/// Why a command stopped. Usage errors map to exit code 2, runtime errors to 1.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e,
        }
    }
}

pub type CmdResult = Result<u8, Failure>;

trait ResultExt<T> {
    fn usage(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display())).runtime()?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot write {}", path.display())).runtime()?;
    Ok(BufWriter::new(f))
}

pub struct RunArgs {
    pub config: PathBuf,
    pub init_f: String,
    pub init_w: String,
    pub dump_trajectory: bool,
    pub out: Option<PathBuf>,
}

pub fn cmd_run(args: &RunArgs) -> CmdResult {
    let exp = ExperimentConfig::load(&args.config).usage()?;
    let mut cfg = exp.learner().usage()?;
    cfg.keep_history = args.dump_trajectory;
    let init_f =
        parse_strategy(&args.init_f, exp.game, Agent::Firm).and_then(|s| Ok(s.vector(&cfg, Agent::Firm)?)).usage()?;
    let init_w = parse_strategy(&args.init_w, exp.game, Agent::Worker)
        .and_then(|s| Ok(s.vector(&cfg, Agent::Worker)?))
        .usage()?;

    let tr = run_dynamics(&cfg, &init_f, &init_w).runtime()?;
    let cert = certify_epsilon_ne(&tr.last, &cfg).runtime()?;
    let (u_f, u_w) = match cfg.two_round_game() {
        Some(g) => g.expected_utilities(&tr.last.firm, &tr.last.worker),
        None => utilities_g1(&tr.last.firm, &tr.last.worker, cfg.grid),
    };

    let dir = args.out.clone().unwrap_or_else(|| exp.output_dir());
    let mut w = csv::Writer::from_writer(create(&dir, "certificate.csv")?);
    (|| -> anyhow::Result<()> {
        w.write_record(["eps", "gap_f", "gap_w", "structural_ne", "converged_at", "steps", "u_f", "u_w"])?;
        w.write_record([
            fmt_real(cert.eps),
            fmt_real(cert.gap_f),
            fmt_real(cert.gap_w),
            u8::from(cert.structural_ne).to_string(),
            tr.converged_at.map_or(String::new(), |t| t.to_string()),
            tr.steps.to_string(),
            fmt_real(u_f),
            fmt_real(u_w),
        ])?;
        w.flush()?;
        Ok(())
    })()
    .runtime()?;

    if args.dump_trajectory {
        let mut rows = Vec::new();
        for (t, p) in tr.history.iter().enumerate().skip(1) {
            for agent in [Agent::Firm, Agent::Worker] {
                for (i, &mass) in p.get(agent).iter().enumerate() {
                    rows.push(TrajectoryRow { step: t, agent: agent.name().to_string(), action_index: i, mass });
                }
            }
        }
        write_trajectory(create(&dir, "trajectory.csv")?, &rows).runtime()?;
    }

    match tr.converged_at {
        Some(t) => println!("converged after {t} steps; eps = {:.3e}; u_f = {u_f:.6}, u_w = {u_w:.6}", cert.eps),
        None => println!("no convergence within {} steps; eps = {:.3e}", tr.steps, cert.eps),
    }
    Ok(0)
}

pub struct SweepArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

pub fn cmd_sweep(args: &SweepArgs) -> CmdResult {
    let exp = ExperimentConfig::load(&args.config).usage()?;
    let cfg = exp.learner().usage()?;
    let axes = exp.axes().usage()?;
    if matches!(args.threads, Some(0)) {
        return Err(Failure::Usage(anyhow!("--threads must be at least 1")));
    }
    let threads = args.threads.or(exp.threads);
    let sweep = sweep_initials(&cfg, &axes, threads).runtime()?;

    let dir = args.out.clone().unwrap_or_else(|| exp.output_dir());
    write_sweep_heatmap(create(&dir, "heatmap.csv")?, &sweep).runtime()?;

    let d = cfg.grid.d() as f64;
    let reference_w = match cfg.reference_w {
        Reference::Pure(k) => Some(k as f64 / d),
        Reference::Zero => None,
    };
    let ok = sweep.cells.iter().filter(|c| c.status != CellStatus::Failed).count();
    let converged = sweep.cells.iter().filter(|c| c.status == CellStatus::Converged).count();
    if ok > 0 {
        let summary = summarize(&sweep, |k| k as f64 / d, reference_w).runtime()?;
        write_summary(create(&dir, "summary.csv")?, &summary).runtime()?;
        println!(
            "{} cells, {converged} converged, {} failed; u_w in [{:.4}, {:.4}]",
            sweep.cells.len(),
            sweep.cells.len() - ok,
            summary.min_uw,
            summary.max_uw
        );
    }
    for c in sweep.cells.iter().filter(|c| c.status == CellStatus::Failed) {
        eprintln!("cell ({}, {}) failed: {}", c.row, c.col, c.error.as_deref().unwrap_or("unknown error"));
    }
    Ok(if ok > 0 { 0 } else { 1 })
}

pub struct MetagameArgs {
    pub heatmap: PathBuf,
    pub tol: f64,
    pub allow_partial: bool,
    pub out: Option<PathBuf>,
    pub max_iter: usize,
}

pub fn cmd_metagame(args: &MetagameArgs) -> CmdResult {
    if !(args.tol > 0.0) {
        return Err(Failure::Usage(anyhow!("--tol must be positive")));
    }
    let file =
        File::open(&args.heatmap).with_context(|| format!("cannot read heatmap {}", args.heatmap.display())).usage()?;
    let rows = read_heatmap(file).usage()?;

    // Axes in order of first appearance; firm on rows, worker on columns.
    let mut firm: Vec<InitialStrategy> = Vec::new();
    let mut worker: Vec<InitialStrategy> = Vec::new();
    let mut cells = HashMap::new();
    for r in &rows {
        if !firm.contains(&r.firm) {
            firm.push(r.firm);
        }
        if !worker.contains(&r.worker) {
            worker.push(r.worker);
        }
        if cells.insert((r.firm, r.worker), (r.status, r.u_w)).is_some() {
            return Err(Failure::Usage(anyhow!("duplicate heatmap cell {:?} / {:?}", r.firm, r.worker)));
        }
    }
    if rows.is_empty() {
        return Err(Failure::Usage(anyhow!("heatmap is empty")));
    }
    let mut kept = Vec::new();
    let mut m = Vec::new();
    for f in &firm {
        let mut row = Vec::with_capacity(worker.len());
        let mut complete = true;
        for w in &worker {
            match cells.get(&(*f, *w)) {
                Some((CellStatus::Converged, u)) => row.push(*u),
                Some(_) => complete = false,
                None => {
                    return Err(Failure::Usage(anyhow!(
                        "heatmap lacks cell {} / {}",
                        format_strategy(f),
                        format_strategy(w)
                    )))
                }
            }
        }
        if complete {
            kept.push(*f);
            m.push(row);
        } else if !args.allow_partial {
            return Err(Failure::Usage(anyhow!(
                "firm row {} has cells that did not converge; pass --allow-partial to drop such rows",
                format_strategy(f)
            )));
        }
    }
    if m.is_empty() {
        return Err(Failure::Runtime(anyhow!("no fully converged rows")));
    }
    let sol = minimax_solve(&m, args.tol, args.max_iter).runtime()?;

    let dir = args.out.clone().unwrap_or_else(|| args.heatmap.parent().map(Path::to_path_buf).unwrap_or_default());
    let mut w = csv::Writer::from_writer(create(&dir, "minimax.csv")?);
    (|| -> anyhow::Result<()> {
        w.write_record(["record", "strategy", "value"])?;
        for (name, v) in [("value_w", sol.value_w), ("gap", sol.br_gap), ("lower", sol.lower), ("upper", sol.upper)] {
            w.write_record([name, "", &fmt_real(v)])?;
        }
        for (label, axis, mix) in [("firm", &kept, &sol.row_mix), ("worker", &worker, &sol.col_mix)] {
            for (s, &p) in axis.iter().zip(mix.iter()) {
                if p > 1e-9 {
                    w.write_record([label, &format_strategy(s), &fmt_real(p)])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    })()
    .runtime()?;

    println!(
        "worker minimax value {:.6} (firm {:.6}); gap {:.2e} over a {}x{} matrix{}",
        sol.value_w,
        1.0 - sol.value_w,
        sol.br_gap,
        m.len(),
        worker.len(),
        if firm.len() > kept.len() { format!(", {} rows dropped", firm.len() - kept.len()) } else { String::new() }
    );
    if sol.br_gap > args.tol {
        eprintln!(
            "warning: gap {:.3e} exceeds tolerance {:.3e} after {} iterations",
            sol.br_gap, args.tol, sol.iterations
        );
    }
    Ok(0)
}

pub struct AuditArgs {
    pub config: Option<PathBuf>,
    pub runs: usize,
    pub seed: Option<u64>,
    pub fault: Fault,
}

pub fn cmd_audit(args: &AuditArgs) -> CmdResult {
    let mut seed = args.seed;
    if let Some(path) = &args.config {
        let exp = ExperimentConfig::load(path).usage()?;
        if exp.game != crate::config::GameName::G1 {
            return Err(Failure::Usage(anyhow!("audits run on the ultimatum game; config has game = \"g2\"")));
        }
        seed = seed.or(exp.seed);
    }
    let seed = seed.unwrap_or(42);
    let report = audit(args.runs, seed, args.fault).runtime()?;
    let armed = report.runs.iter().filter(|r| r.firm_unimodal_armed).count();
    let converged = report.runs.iter().filter(|r| r.converged_at.is_some()).count();
    println!("{} runs (seed {seed}), {converged} converged, firm unimodality armed in {armed}", report.runs.len());
    let violations = report.violations();
    for m in Monitor::ALL {
        let n = violations.iter().filter(|v| v.1 == m).count();
        println!("{:<28} {}", m.name(), if n == 0 { "ok".to_string() } else { format!("{n} runs violated") });
    }
    if violations.is_empty() {
        return Ok(0);
    }
    for (index, m, step) in &violations {
        let case = draw_audit_case(seed, *index, 30);
        println!(
            "violation: {} at step {step} in case {index} (D = {}, eta = {}); reproduce with --seed {seed}",
            m.name(),
            case.d,
            case.eta
        );
    }
    Ok(1)
}

pub struct OracleArgs {
    pub d: usize,
    pub eta: f64,
    pub k: usize,
    pub w0: f64,
    pub f0: f64,
    pub n: usize,
}

fn outcome_name(o: RecurrenceOutcome) -> &'static str {
    match o {
        RecurrenceOutcome::Decreases => "decreases",
        RecurrenceOutcome::ExactConvergence => "exact_convergence",
        RecurrenceOutcome::AsymptoticConvergence => "asymptotic_convergence",
    }
}

pub fn cmd_oracle(args: &OracleArgs) -> CmdResult {
    let p = recurrence_params(args.d, args.eta, args.k, args.w0, args.f0).usage()?;
    let iterated = iterate_recurrence(&p, args.n);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "n,w_closed,f_closed,w_iter,f_iter,abs_diff")?;
        for (n, &(wi, fi)) in iterated.iter().enumerate() {
            let (wc, fc) = recurrence_closed_form(&p, n);
            let diff = (wc - wi).abs().max((fc - fi).abs());
            writeln!(
                out,
                "{n},{},{},{},{},{}",
                fmt_real(wc),
                fmt_real(fc),
                fmt_real(wi),
                fmt_real(fi),
                fmt_real(diff)
            )?;
        }
        let (event, at) = iterate_to_event(&p);
        writeln!(out, "# verdict {} (alpha1_f = {:e})", outcome_name(classify_recurrence(&p)), p.alpha1_f)?;
        writeln!(out, "# iterated {} at step {at}", outcome_name(event))
    };
    write().runtime()?;
    Ok(0)
}
