use std::path::Path;
use std::time::Instant;

use lgadmm::calibration::{blocks_as_matrices, default_metrics, pairwise_gaps, save_instance};
use lgadmm::certificates::{feasible_probes, reference_solution, run_all_checks};
use lgadmm::io::{atomic_write, trajectory_csv};
use lgadmm::{
    build_problem, evaluate_objective, generate_instance, primal_feasibility, sigma_gamma, solve, CertificateReport,
    Certifier, Config, Instance, Point, Problem, SolveResult,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::stats::{mean, spearman};

/// Seed offset for the certificate probes, kept apart from the instance stream.
const PROBE_SEED_OFFSET: u64 = 0x9e37_79b9;

/// Fraction of a run treated as burn-in when inspecting objective curves.
const BURN_IN_FRACTION: f64 = 0.1;

fn instance(cfg: &RunConfig, seed: u64) -> CliResult<(Instance, Problem)> {
    let inst: Instance = generate_instance(cfg.n, seed)?;
    let problem = build_problem(&inst)?;
    Ok((inst, problem))
}

fn solver_config(cfg: &RunConfig, gamma: f64) -> Config {
    Config::new(cfg.rho, gamma, default_metrics(cfg.n, cfg.sigma))
        .with_tolerance(cfg.tolerance)
        .with_max_iterations(cfg.max_iterations)
        .strict(cfg.strict)
}

fn timed_solve(problem: &Problem, config: &Config) -> CliResult<(SolveResult<f64>, f64)> {
    let start = Instant::now();
    let res = solve(problem, config, Point::zeros(problem))?;
    Ok((res, start.elapsed().as_secs_f64()))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(atomic_write(path, &bytes)?)
}

fn write_csv<S: Serialize>(path: &Path, rows: &[S]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(atomic_write(path, &bytes)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub iterations: usize,
    pub objective: f64,
    pub final_epsilon: f64,
    pub wall_seconds: f64,
    pub converged: bool,
    pub n: usize,
    pub seed: u64,
    pub rho: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub feasibility_residual: f64,
    /// `‖X1−X2‖, ‖X1−X3‖, ‖X2−X3‖` (Frobenius)
    pub pairwise_gaps: [f64; 3],
    pub min_eigenvalue_x1: f64,
    pub warnings: Vec<String>,
}

fn summarize(cfg: &RunConfig, seed: u64, gamma: f64, problem: &Problem, res: &SolveResult<f64>, secs: f64) -> CliResult<SolveSummary> {
    let x1 = blocks_as_matrices(cfg.n, &res.point)?.swap_remove(0);
    Ok(SolveSummary {
        iterations: res.iterations,
        objective: evaluate_objective(problem, &res.point)?,
        final_epsilon: res.final_epsilon,
        wall_seconds: secs,
        converged: res.converged,
        n: cfg.n,
        seed,
        rho: cfg.rho,
        gamma,
        sigma: cfg.sigma,
        feasibility_residual: primal_feasibility(problem, &res.point)?,
        pairwise_gaps: pairwise_gaps(&res.point),
        min_eigenvalue_x1: x1.min_eigenvalue()?,
        warnings: res.diagnostics.warnings.clone(),
    })
}

/// One calibration solve: `trajectory.csv`, `summary.json` and `instance/`.
pub fn run_solve(cfg: &RunConfig) -> CliResult<SolveSummary> {
    ensure_dir(&cfg.out)?;
    let (inst, problem) = instance(cfg, cfg.seed)?;
    ensure_dir(&cfg.out.join("instance"))?;
    save_instance(&cfg.out.join("instance"), &inst)?;
    let (res, secs) = timed_solve(&problem, &solver_config(cfg, cfg.gamma))?;
    atomic_write(&cfg.out.join("trajectory.csv"), &trajectory_csv(&res.reports)?)?;
    let summary = summarize(cfg, cfg.seed, cfg.gamma, &problem, &res, secs)?;
    write_json(&cfg.out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub gamma: f64,
    pub seed: u64,
    pub iterations: usize,
    pub seconds: f64,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub mean_iterations: f64,
    pub mean_seconds: f64,
    pub mean_objective: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub n: usize,
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
    /// Rank correlation between gamma and mean iterations.
    pub spearman: Option<f64>,
}

impl SweepResult {
    pub fn row(&self, gamma: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| (r.gamma - gamma).abs() < 1e-9)
    }
}

/// Grid × seeds, solved on a worker pool; `sweep_runs.csv`, `sweep.csv` and
/// `sweep_summary.json` are written once every cell has finished.
pub fn run_gamma_sweep(cfg: &RunConfig) -> CliResult<SweepResult> {
    ensure_dir(&cfg.out)?;
    let seeds: Vec<u64> = (0..cfg.repeat as u64).map(|r| cfg.seed + r).collect();
    let problems = seeds
        .iter()
        .map(|&s| instance(cfg, s).map(|(_, p)| p))
        .collect::<CliResult<Vec<_>>>()?;
    let jobs: Vec<(usize, f64)> = cfg
        .gamma_grid
        .iter()
        .flat_map(|&g| (0..seeds.len()).map(move |s| (s, g)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(s, gamma)| -> CliResult<SweepCell> {
            let problem = &problems[s];
            let (res, secs) = timed_solve(problem, &solver_config(cfg, gamma).parallel(false))?;
            Ok(SweepCell {
                gamma,
                seed: seeds[s],
                iterations: res.iterations,
                seconds: secs,
                objective: evaluate_objective(problem, &res.point)?,
                converged: res.converged,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let rows: Vec<SweepRow> = cfg
        .gamma_grid
        .iter()
        .map(|&gamma| {
            let group: Vec<&SweepCell> = cells.iter().filter(|c| c.gamma == gamma).collect();
            let pick = |f: fn(&SweepCell) -> f64| mean(&group.iter().map(|c| f(c)).collect::<Vec<_>>());
            SweepRow {
                gamma,
                mean_iterations: pick(|c| c.iterations as f64),
                mean_seconds: pick(|c| c.seconds),
                mean_objective: pick(|c| c.objective),
            }
        })
        .collect();
    let gammas: Vec<f64> = rows.iter().map(|r| r.gamma).collect();
    let iters: Vec<f64> = rows.iter().map(|r| r.mean_iterations).collect();
    let result = SweepResult {
        n: cfg.n,
        seeds,
        spearman: spearman(&gammas, &iters),
        rows,
        cells,
    };
    write_csv(&cfg.out.join("sweep_runs.csv"), &result.cells)?;
    write_csv(&cfg.out.join("sweep.csv"), &result.rows)?;
    write_json(&cfg.out.join("sweep_summary.json"), &result)?;
    Ok(result)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub gamma: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub objective: f64,
    pub final_epsilon: f64,
    pub converged: bool,
    /// Objective curve is monotone (in its overall direction) after burn-in.
    pub monotone_after_burn_in: bool,
    pub first_violation: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
struct CurvePoint {
    gamma: f64,
    k: usize,
    objective: f64,
    epsilon: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareResult {
    pub n: usize,
    pub seed: u64,
    pub rows: Vec<CompareRow>,
    /// iterations(γ=1) / iterations(γ=1.9)
    pub iteration_ratio: f64,
    /// |f₁ − f₂| / max(1, |f₁|)
    pub objective_rel_diff: f64,
    pub summaries: Vec<SolveSummary>,
}

/// First index past burn-in where the curve moves against its overall trend.
pub fn first_monotonicity_violation(curve: &[f64], burn_in: usize) -> Option<usize> {
    if curve.len() < burn_in + 2 {
        return None;
    }
    let tail = &curve[burn_in..];
    let down = tail[tail.len() - 1] <= tail[0];
    tail.windows(2).position(|w| {
        let slack = 1e-9 * (1.0 + w[0].abs());
        if down {
            w[1] > w[0] + slack
        } else {
            w[1] < w[0] - slack
        }
    })
    .map(|i| i + burn_in + 1)
}

/// γ = 1 against γ = 1.9 on one instance; `compare.csv`, `compare_curves.csv`,
/// `compare_summary.json` and `instance/`.
pub fn run_baseline_compare(cfg: &RunConfig) -> CliResult<CompareResult> {
    ensure_dir(&cfg.out)?;
    let (inst, problem) = instance(cfg, cfg.seed)?;
    ensure_dir(&cfg.out.join("instance"))?;
    save_instance(&cfg.out.join("instance"), &inst)?;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut summaries = Vec::new();
    for gamma in [1.0, 1.9] {
        let (res, secs) = timed_solve(&problem, &solver_config(cfg, gamma))?;
        let objective: Vec<f64> = res.reports.iter().map(|r| r.objective).collect();
        let burn_in = ((objective.len() as f64 * BURN_IN_FRACTION).ceil() as usize).max(10);
        let violation = first_monotonicity_violation(&objective, burn_in);
        if let Some(k) = violation {
            log::warn!("gamma = {gamma}: objective curve not monotone after burn-in (iteration {k})");
        }
        curves.extend(res.reports.iter().map(|r| CurvePoint {
            gamma,
            k: r.iteration,
            objective: r.objective,
            epsilon: r.epsilon,
        }));
        let summary = summarize(cfg, cfg.seed, gamma, &problem, &res, secs)?;
        rows.push(CompareRow {
            gamma,
            iterations: res.iterations,
            seconds: secs,
            objective: summary.objective,
            final_epsilon: res.final_epsilon,
            converged: res.converged,
            monotone_after_burn_in: violation.is_none(),
            first_violation: violation,
        });
        summaries.push(summary);
    }
    let (f1, f2) = (rows[0].objective, rows[1].objective);
    let result = CompareResult {
        n: cfg.n,
        seed: cfg.seed,
        iteration_ratio: rows[0].iterations as f64 / rows[1].iterations as f64,
        objective_rel_diff: (f1 - f2).abs() / f1.abs().max(1.0),
        rows,
        summaries,
    };
    write_csv(&cfg.out.join("compare.csv"), &result.rows)?;
    write_csv(&cfg.out.join("compare_curves.csv"), &curves)?;
    write_json(&cfg.out.join("compare_summary.json"), &result)?;
    Ok(result)
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyBundle {
    pub n: usize,
    pub seed: u64,
    pub rho: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub sigma_gamma: f64,
    pub tolerance: f64,
    pub negative_control: bool,
    pub iterations: usize,
    pub converged: bool,
    pub reference_iterations: usize,
    pub reference_converged: bool,
    pub passed: bool,
    pub reports: Vec<CertificateReport>,
}

impl CertifyBundle {
    pub fn failed_checks(&self) -> Vec<&str> {
        self.reports
            .iter()
            .filter(|r| !r.passed || r.is_skipped())
            .map(|r| r.check.as_str())
            .collect()
    }
}

/// Strict run with a recorded trajectory, a high-accuracy reference and ten
/// probes, then every certificate; `certificates.json`. The negative control
/// replaces `w¹` by `w⁰ + 10(w⁰ − w*)`.
pub fn run_certify(cfg: &RunConfig) -> CliResult<CertifyBundle> {
    ensure_dir(&cfg.out)?;
    let (inst, problem) = instance(cfg, cfg.seed)?;
    ensure_dir(&cfg.out.join("instance"))?;
    save_instance(&cfg.out.join("instance"), &inst)?;
    let config = solver_config(cfg, cfg.gamma).strict(true).recording(true);
    let run = solve(&problem, &config, Point::zeros(&problem))?;
    let reference = reference_solution(&problem, &config, Point::zeros(&problem))?;
    let mut traj = run
        .trajectory
        .ok_or_else(|| CliError::Io("solver returned no trajectory".into()))?;
    if cfg.negative_control {
        let w0 = traj.iterates[0].clone();
        traj.iterates[1] = w0.add(&w0.sub(&reference.point).scaled(10.0));
    }
    let certifier = Certifier::new(&problem, &config)?;
    let probes = feasible_probes(&problem, &reference.point, 1.0, 10, cfg.seed.wrapping_add(PROBE_SEED_OFFSET));
    let mut reports = run_all_checks(&certifier, &traj, &reference.point, &probes)?;
    reports.push(certifier.step_inequality_check(&traj, &probes)?);
    let mut bundle = CertifyBundle {
        n: cfg.n,
        seed: cfg.seed,
        rho: cfg.rho,
        gamma: cfg.gamma,
        sigma: cfg.sigma,
        sigma_gamma: sigma_gamma(cfg.gamma)?,
        tolerance: cfg.tolerance,
        negative_control: cfg.negative_control,
        iterations: run.iterations,
        converged: run.converged,
        reference_iterations: reference.iterations,
        reference_converged: reference.converged,
        passed: false,
        reports,
    };
    bundle.passed = bundle.failed_checks().is_empty();
    write_json(&cfg.out.join("certificates.json"), &bundle)?;
    Ok(bundle)
}
