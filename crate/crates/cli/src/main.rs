//! `gsqg`: command-line driver for the point-vortex library.
//!
//! Exit codes: 0 on success, 2 when a check ran but came out negative,
//! 1 on usage or runtime errors.

mod commands;
mod manifest;

use clap::{Args, Parser, Subcommand};
use commands::{BurstParams, FindConfigParams, SimulateParams, SweepCmdParams, Verdict};
use gsqg::search::SweepParams;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gsqg", version, about = "Self-similar point-vortex triples for generalized SQG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the normalized triple at (α, x) and run the stability test.
    FindConfig(FindConfigArgs),
    /// Scan α and record the admissible x-interval at each value.
    Sweep(SweepArgs),
    /// Integrate a triple read from a JSON file.
    Simulate(SimulateArgs),
    /// Run a burst scenario, or a convergence study over several start times.
    Burst(BurstArgs),
}

#[derive(Args)]
struct FindConfigArgs {
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    /// Reduced side length in (0, 1).
    #[arg(long, conflicts_with = "auto", required_unless_present = "auto")]
    x: Option<f64>,
    /// Use the midpoint of the admissible interval at this α.
    #[arg(long)]
    auto: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = SweepParams::default().alpha_min)]
    alpha_min: f64,
    #[arg(long, default_value_t = SweepParams::default().alpha_max)]
    alpha_max: f64,
    #[arg(long, default_value_t = SweepParams::default().alpha_step)]
    alpha_step: f64,
    /// Pitch of the coarse x grid.
    #[arg(long, default_value_t = SweepParams::default().coarse)]
    x_coarse: f64,
    /// Bisection tolerance for the interval endpoints.
    #[arg(long, default_value_t = SweepParams::default().refine_tol)]
    refine_tol: f64,
    /// Skip the excluded band around α = 2 when the range straddles it.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    split_at_2: bool,
    /// α step 1e-4 and x pitch 1e-6, with endpoints bisected to 1e-8.
    #[arg(long, conflicts_with_all = ["alpha_step", "x_coarse", "refine_tol"])]
    fine_mesh: bool,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "GSQG_JOBS")]
    jobs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Triple as JSON: {"alpha", "positions": [[x, y]; 3], "intensities": [..; 3]}.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    t0: f64,
    #[arg(long, allow_negative_numbers = true)]
    t1: f64,
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    /// Trajectory CSV; the manifest goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BurstArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn run(cmd: Command) -> anyhow::Result<Verdict> {
    match cmd {
        Command::FindConfig(a) => commands::find_config(&FindConfigParams {
            alpha: a.alpha,
            x: a.x,
            auto: a.auto,
            out: a.out,
        }),
        Command::Sweep(a) => {
            let mut sweep = SweepParams {
                alpha_min: a.alpha_min,
                alpha_max: a.alpha_max,
                alpha_step: a.alpha_step,
                coarse: a.x_coarse,
                refine_tol: a.refine_tol,
                split_at_2: a.split_at_2,
            };
            if a.fine_mesh {
                sweep.alpha_step = 1e-4;
                sweep.coarse = 1e-6;
                sweep.refine_tol = 1e-8;
            }
            commands::sweep(&SweepCmdParams {
                sweep,
                jobs: a.jobs,
                out: a.out,
            })
        }
        Command::Simulate(a) => commands::simulate(&SimulateParams {
            config: a.config,
            t0: a.t0,
            t1: a.t1,
            rel_tol: a.rel_tol,
            out: a.out,
        }),
        Command::Burst(a) => commands::burst(&BurstParams {
            scenario: a.scenario,
            out: a.out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(Verdict::Positive) => ExitCode::SUCCESS,
        Ok(Verdict::Negative) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
