use std::path::PathBuf;
use std::process::ExitCode;

use bargain_cli::commands::{
    cmd_audit, cmd_metagame, cmd_oracle, cmd_run, cmd_sweep, AuditArgs, MetagameArgs, OracleArgs, RunArgs, SweepArgs,
};
use bargain_core::learner::Fault;
use clap::{Parser, Subcommand, ValueEnum};

/// FTRL learning dynamics in discretized bargaining games.
#[derive(Parser)]
#[command(name = "ftrl-bargain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and certify its endpoint.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Firm initial strategy: grid index (g1), "offer:threshold" (g2) or "uniform".
        #[arg(long)]
        init_f: String,
        /// Worker initial strategy: grid index (g1), "threshold:counter" (g2) or "uniform".
        #[arg(long)]
        init_w: String,
        /// Also write every iterate to trajectory.csv.
        #[arg(long)]
        dump_trajectory: bool,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every pair of initial strategies and write heatmap.csv and summary.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (overrides the config).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Solve the meta-game of a heatmap and write minimax.csv.
    Metagame {
        #[arg(long)]
        heatmap: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Drop firm rows with unconverged cells instead of refusing.
        #[arg(long)]
        allow_partial: bool,
        #[arg(long, default_value_t = 200_000)]
        max_iter: usize,
        /// Output directory (defaults to the heatmap's).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized ultimatum runs with every invariant monitor armed.
    Audit {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Defaults to the config's seed, then 42.
        #[arg(long)]
        seed: Option<u64>,
        /// Inject a defect (negative control).
        #[arg(long, value_enum, default_value_t = FaultArg::None)]
        fault: FaultArg,
    },
    /// Compare the closed-form recurrence with direct iteration.
    Oracle {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        w0: f64,
        #[arg(long)]
        f0: f64,
        #[arg(long, default_value_t = 50)]
        n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    None,
    SkipWorkerProjection,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, init_f, init_w, dump_trajectory, out } => {
            cmd_run(&RunArgs { config, init_f, init_w, dump_trajectory, out })
        }
        Command::Sweep { config, out, threads } => cmd_sweep(&SweepArgs { config, out, threads }),
        Command::Metagame { heatmap, tol, allow_partial, max_iter, out } => {
            cmd_metagame(&MetagameArgs { heatmap, tol, allow_partial, out, max_iter })
        }
        Command::Audit { config, runs, seed, fault } => {
            let fault = match fault {
                FaultArg::None => Fault::None,
                FaultArg::SkipWorkerProjection => Fault::SkipWorkerProjection,
            };
            cmd_audit(&AuditArgs { config, runs, seed, fault })
        }
        Command::Oracle { d, eta, k, w0, f0, n } => cmd_oracle(&OracleArgs { d, eta, k, w0, f0, n }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.exit_code())
        }
    }
}
