//! CSV schemas. Reals are written with 17 significant digits, so every file
//! reads back to the same doubles.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use bargain_core::metagame::{CellStatus, InitialStrategy, SweepResult, SweepSummary};

pub const HEATMAP_HEADER: [&str; 8] =
    ["firm_init", "worker_init", "u_w", "eps", "converged_at", "status", "credible_threat", "noncredible_threat"];
pub const SUMMARY_HEADER: [&str; 4] = ["min_uw", "max_uw", "prop_ge_init", "prop_ge_ref"];
pub const TRAJECTORY_HEADER: [&str; 4] = ["step", "agent", "action_index", "mass"];

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_real(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().with_context(|| format!("bad number {s:?}"))
}

fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

fn fmt_flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn parse_flag(s: &str) -> Result<Option<bool>> {
    match s {
        "" => Ok(None),
        "1" => Ok(Some(true)),
        "0" => Ok(Some(false)),
        _ => bail!("bad flag {s:?}"),
    }
}

/// One heatmap cell as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapRow {
    pub firm: InitialStrategy,
    pub worker: InitialStrategy,
    pub u_w: f64,
    pub eps: f64,
    pub converged_at: Option<usize>,
    pub status: CellStatus,
    /// Threat flags; two-round game only.
    pub credible_threat: Option<bool>,
    pub noncredible_threat: Option<bool>,
}

impl HeatmapRow {
    pub fn from_sweep(sweep: &SweepResult) -> Vec<HeatmapRow> {
        sweep
            .cells
            .iter()
            .map(|c| HeatmapRow {
                firm: sweep.axes.firm[c.row],
                worker: sweep.axes.worker[c.col],
                u_w: c.u_w,
                eps: c.eps,
                converged_at: c.converged_at,
                status: c.status,
                credible_threat: c.threats.as_ref().map(|t| t.credible()),
                noncredible_threat: c.threats.as_ref().map(|t| t.noncredible()),
            })
            .collect()
    }
}

fn is_two_round(rows: &[HeatmapRow]) -> bool {
    rows.iter().any(|r| {
        matches!(r.firm, InitialStrategy::FirmPlan { .. }) || matches!(r.worker, InitialStrategy::WorkerPlan { .. })
    })
}

/// Writes a heatmap. Two-round files split each strategy over two columns:
/// `firm_init` is the offer and `firm_threshold` the acceptance threshold,
/// `worker_init` the threshold and `worker_counter` the counter-offer.
pub fn write_heatmap<W: Write>(out: W, rows: &[HeatmapRow], two_round: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = HEATMAP_HEADER.to_vec();
    if two_round {
        header.splice(2..2, ["worker_counter", "firm_threshold"]);
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = Vec::with_capacity(header.len());
        if two_round {
            let (offer, threshold) = match r.firm {
                InitialStrategy::FirmPlan { offer, threshold } => (offer.to_string(), threshold.to_string()),
                InitialStrategy::Uniform => ("uniform".into(), String::new()),
                other => bail!("{other:?} is not a two-round firm strategy"),
            };
            let (wt, counter) = match r.worker {
                InitialStrategy::WorkerPlan { threshold, counter } => (threshold.to_string(), counter.to_string()),
                InitialStrategy::Uniform => ("uniform".into(), String::new()),
                other => bail!("{other:?} is not a two-round worker strategy"),
            };
            rec.extend([offer, wt, counter, threshold]);
        } else {
            rec.extend([crate::config::format_strategy(&r.firm), crate::config::format_strategy(&r.worker)]);
        }
        rec.extend([
            fmt_real(r.u_w),
            fmt_real(r.eps),
            fmt_opt(r.converged_at),
            r.status.as_str().to_string(),
            fmt_opt(r.credible_threat.map(fmt_flag)),
            fmt_opt(r.noncredible_threat.map(fmt_flag)),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_heatmap<R: Read>(input: R) -> Result<Vec<HeatmapRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    let col =
        |name: &str| header.iter().position(|h| h == name).with_context(|| format!("heatmap lacks column {name}"));
    let idx: Vec<usize> = HEATMAP_HEADER.iter().map(|h| col(h)).collect::<Result<_>>()?;
    let two_round = header.iter().any(|h| h == "worker_counter");
    let extra = if two_round { Some((col("worker_counter")?, col("firm_threshold")?)) } else { None };
    let index = |s: &str| s.parse::<usize>().with_context(|| format!("bad grid index {s:?}"));

    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let parsed = (|| -> Result<HeatmapRow> {
            let (firm, worker) = match extra {
                None => (
                    crate::config::parse_strategy(
                        field(idx[0]),
                        crate::config::GameName::G1,
                        bargain_core::Agent::Firm,
                    )?,
                    crate::config::parse_strategy(
                        field(idx[1]),
                        crate::config::GameName::G1,
                        bargain_core::Agent::Worker,
                    )?,
                ),
                Some((wc, ft)) => {
                    let firm = match field(idx[0]) {
                        "uniform" => InitialStrategy::Uniform,
                        offer => InitialStrategy::FirmPlan { offer: index(offer)?, threshold: index(field(ft))? },
                    };
                    let worker = match field(idx[1]) {
                        "uniform" => InitialStrategy::Uniform,
                        t => InitialStrategy::WorkerPlan { threshold: index(t)?, counter: index(field(wc))? },
                    };
                    (firm, worker)
                }
            };
            let status = match field(idx[5]) {
                "converged" => CellStatus::Converged,
                "max_steps" => CellStatus::MaxSteps,
                "failed" => CellStatus::Failed,
                s => bail!("bad status {s:?}"),
            };
            let conv = field(idx[4]);
            Ok(HeatmapRow {
                firm,
                worker,
                u_w: parse_real(field(idx[2]))?,
                eps: parse_real(field(idx[3]))?,
                converged_at: if conv.is_empty() { None } else { Some(index(conv)?) },
                status,
                credible_threat: parse_flag(field(idx[6]))?,
                noncredible_threat: parse_flag(field(idx[7]))?,
            })
        })();
        rows.push(parsed.with_context(|| format!("heatmap data row {}", line + 1))?);
    }
    Ok(rows)
}

/// Writes a heatmap for a finished sweep.
pub fn write_sweep_heatmap<W: Write>(out: W, sweep: &SweepResult) -> Result<()> {
    let rows = HeatmapRow::from_sweep(sweep);
    let two_round = is_two_round(&rows);
    write_heatmap(out, &rows, two_round)
}

pub fn write_summary<W: Write>(out: W, s: &SweepSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    w.write_record([
        fmt_real(s.min_uw),
        fmt_real(s.max_uw),
        fmt_real(s.prop_ge_init),
        fmt_opt(s.prop_ge_ref.map(fmt_real)),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(input: R) -> Result<SweepSummary> {
    let mut rd = csv::Reader::from_reader(input);
    let rec = rd.records().next().context("summary has no data row")??;
    let get = |i: usize| rec.get(i).unwrap_or("");
    Ok(SweepSummary {
        min_uw: parse_real(get(0))?,
        max_uw: parse_real(get(1))?,
        prop_ge_init: parse_real(get(2))?,
        prop_ge_ref: if get(3).is_empty() { None } else { Some(parse_real(get(3))?) },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub agent: String,
    pub action_index: usize,
    pub mass: f64,
}

pub fn write_trajectory<W: Write>(out: W, rows: &[TrajectoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for r in rows {
        w.write_record([r.step.to_string(), r.agent.clone(), r.action_index.to_string(), fmt_real(r.mass)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory<R: Read>(input: R) -> Result<Vec<TrajectoryRow>> {
    let mut rd = csv::Reader::from_reader(input);
    rd.records()
        .map(|rec| {
            let rec = rec?;
            Ok(TrajectoryRow {
                step: rec[0].parse()?,
                agent: rec[1].to_string(),
                action_index: rec[2].parse()?,
                mass: parse_real(&rec[3])?,
            })
        })
        .collect()
}
