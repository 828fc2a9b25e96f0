//! Command-line harness around the `lgadmm` solver: single solves, relaxation
//! factor sweeps, a γ = 1 versus γ = 1.9 comparison and trajectory
//! certification, all on the correlation calibration benchmark.
//!
//! Exit codes: 0 success, 2 configuration error, 3 divergence, 4 certificate
//! failure, 1 anything else.

pub mod commands;
pub mod config;
pub mod error;
pub mod stats;

pub use commands::{
    first_monotonicity_violation, run_baseline_compare, run_certify, run_gamma_sweep, run_solve, CertifyBundle,
    CompareResult, CompareRow, SolveSummary, SweepCell, SweepResult, SweepRow,
};
pub use config::{default_grid, parse_grid, Cli, Command, CommandArgs, RunArgs, RunConfig};
pub use error::{CliError, CliResult};

/// Runs a resolved configuration and returns a one-line summary.
pub fn execute(cfg: &RunConfig) -> CliResult<String> {
    match cfg.command {
        Command::Solve => {
            let s = run_solve(cfg)?;
            Ok(format!(
                "iterations={} objective={:.6} epsilon={:.3e} converged={} seconds={:.3}",
                s.iterations, s.objective, s.final_epsilon, s.converged, s.wall_seconds
            ))
        }
        Command::GammaSweep => {
            let r = run_gamma_sweep(cfg)?;
            let rho = r.spearman.map_or("n/a".to_string(), |s| format!("{s:.4}"));
            Ok(format!("{} gamma values x {} seeds, spearman={rho}", r.rows.len(), r.seeds.len()))
        }
        Command::BaselineCompare => {
            let r = run_baseline_compare(cfg)?;
            Ok(format!(
                "iterations {} vs {} (ratio {:.3}), objective rel diff {:.2e}",
                r.rows[0].iterations, r.rows[1].iterations, r.iteration_ratio, r.objective_rel_diff
            ))
        }
        Command::Certify => {
            let b = run_certify(cfg)?;
            if b.passed {
                Ok(format!("all {} checks passed, sigma_gamma={}", b.reports.len(), b.sigma_gamma))
            } else {
                Err(CliError::Certificate(format!("failed: {}", b.failed_checks().join(", "))))
            }
        }
    }
}

pub fn run(cli: Cli) -> CliResult<String> {
    let (command, args) = cli.command.split();
    execute(&RunConfig::resolve(command, &args)?)
}
