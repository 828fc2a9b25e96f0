//! Linearized generalized ADMM for m blocks.
//!
//! One iteration from `w^k = (x_1^k, …, x_m^k, y^k)`:
//!
//! ```text
//! x_j^{k+1} = argmin ϑ_j + ρ/2‖A_j x_j + Σ_{i≠j} A_i x_i^k − b − y^k/ρ‖² + ½‖x_j − x_j^k‖²_{P_j}   (j < m, Jacobi)
//! x_m^{k+1} = argmin ϑ_m + ρ/2‖γS + (1−γ)(b − A_m x_m^k) + A_m x_m − b − y^k/ρ‖² + ½‖x_m − x_m^k‖²_{P_m}
//! y^{k+1}   = y^k − ρ(γS + (1−γ)(b − A_m x_m^k) + A_m x_m^{k+1} − b)
//! ```
//!
//! where `S = Σ_{i<m} A_i x_i^{k+1}`. The predictor
//! `w̄^k = (x^{k+1}, y^k − ρ(S + A_m x_m^k − b))` satisfies
//! `w^{k+1} = w^k − M(w^k − w̄^k)`.

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, axpy, DenseMatrix};
use crate::metrics::{MetricOperators, Weight};
use crate::problem::{evaluate_objective, BlockProblem, Metric, PrimalDualPoint};
use crate::scalar::Real;

/// Below this first-step norm a component's stopping test uses the absolute change.
pub const STOP_DENOMINATOR_FLOOR: f64 = 1e-14;

/// Largest dimension for which eigenvalue diagnostics use a dense decomposition.
pub const DENSE_EIGEN_LIMIT: usize = 400;

const EIG_ZERO: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SolverConfig<T: Real> {
    pub rho: T,
    pub gamma: T,
    /// `P_1, …, P_m`
    pub metrics: Vec<Metric<T>>,
    pub max_iterations: usize,
    pub tolerance: T,
    /// Promote convergence-requirement violations from warnings to errors.
    pub strict_theory_mode: bool,
    pub record_trajectory: bool,
    /// Fill [`StepReport::h_norm_step`].
    pub track_h_norm: bool,
    /// Run first-phase subproblems on the rayon pool.
    pub parallel: bool,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(rho: T, gamma: T, metrics: Vec<Metric<T>>) -> Self {
        Self {
            rho,
            gamma,
            metrics,
            max_iterations: 10_000,
            tolerance: T::lit(1e-6),
            strict_theory_mode: false,
            record_trajectory: false,
            track_h_norm: false,
            parallel: true,
        }
    }

    pub fn with_tolerance(mut self, tol: T) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn strict(mut self, on: bool) -> Self {
        self.strict_theory_mode = on;
        self
    }

    pub fn recording(mut self, on: bool) -> Self {
        self.record_trajectory = on;
        self
    }

    pub fn tracking_h_norm(mut self, on: bool) -> Self {
        self.track_h_norm = on;
        self
    }

    pub fn parallel(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }

    pub fn operators<'a>(&'a self, problem: &'a BlockProblem<T>) -> Result<MetricOperators<'a, T>> {
        MetricOperators::new(problem, &self.metrics, self.rho, self.gamma)
    }
}

/// Outcome of [`validate_config`].
#[derive(Debug, Clone)]
pub struct ConfigDiagnostics<T> {
    pub gamma_in_range: bool,
    /// `λ_min(P_i)` for `i < m`.
    pub first_phase_min_eigs: Vec<T>,
    /// `λ_min(G₁)`: dense eigendecomposition or matrix-free estimate.
    pub g1_min_eig: T,
    /// Certified bound `min_i λ_min(P_i) − ρ(m−2)‖A_i‖²` ≤ `λ_min(G₁)`.
    pub g1_lower_bound: T,
    pub g1_positive_definite: bool,
    /// `λ_min(P_m + (ρ/γ)A_mᵀA_m)`
    pub last_block_min_eig: T,
    pub last_block_positive_definite: bool,
    /// `λ_min(P_m)`, reported separately from the last-block condition.
    pub pm_min_eig: T,
    pub warnings: Vec<String>,
}

impl<T: Real> ConfigDiagnostics<T> {
    /// All preconditions of the convergence theory hold.
    pub fn theory_holds(&self) -> bool {
        self.gamma_in_range && self.g1_positive_definite && self.last_block_positive_definite
    }
}

fn symmetric_min_eig<T: Real>(dim: usize, dense: impl FnOnce() -> DenseMatrix<T>, apply: impl Fn(&[T]) -> Vec<T>) -> Result<T> {
    if dim == 0 {
        return Ok(T::infinity());
    }
    if dim <= DENSE_EIGEN_LIMIT {
        dense().min_eigenvalue()
    } else {
        Ok(linalg::extreme_eigenvalues(dim, apply).0)
    }
}

/// Checks `γ ∈ (0, 2)`, the definiteness of `G₁` and of `P_m + (ρ/γ)A_mᵀA_m`.
/// In strict mode violations are errors, otherwise they become warnings.
pub fn validate_config<T: Real>(problem: &BlockProblem<T>, config: &SolverConfig<T>) -> Result<ConfigDiagnostics<T>> {
    let (rho, gamma) = (config.rho, config.gamma);
    if !(gamma > T::zero() && gamma < T::two()) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0, 2), got {gamma}")));
    }
    if !rho.is_finite() || rho <= T::zero() {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    if config.tolerance.is_nan() || config.tolerance <= T::zero() {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let ops = config.operators(problem)?;
    let m = problem.num_blocks();
    let dims = problem.block_dims();
    let zero_tol = T::lit(EIG_ZERO);
    let mut warnings = Vec::new();

    let first_phase_min_eigs = config.metrics[..m - 1]
        .iter()
        .map(Metric::min_eigenvalue)
        .collect::<Result<Vec<_>>>()?;
    for (i, &l) in first_phase_min_eigs.iter().enumerate() {
        if l <= zero_tol {
            warnings.push(format!("P_{} is not positive definite (min eigenvalue {l:e})", i + 1));
        }
    }

    let spread = T::from_usize(m - 2).unwrap();
    let g1_lower_bound = problem.blocks()[..m - 1]
        .iter()
        .zip(&first_phase_min_eigs)
        .map(|(b, &l)| l - rho * spread * b.map.gram_norm())
        .fold(T::infinity(), T::min);

    let nr: usize = dims[..m - 1].iter().sum();
    let g1_min_eig = if g1_lower_bound > zero_tol {
        // Certified already; still report the actual value when cheap.
        if nr <= DENSE_EIGEN_LIMIT {
            dense_g1(problem, config)?.min_eigenvalue()?
        } else {
            g1_lower_bound
        }
    } else {
        symmetric_min_eig(
            nr,
            || dense_g1(problem, config).expect("dense G1"),
            |v| {
                let parts = PrimalDualPoint::from_flat(&dims[..m - 1], v).expect("flat");
                ops.apply_g1(&parts.primal).concat()
            },
        )?
    };
    let g1_positive_definite = g1_min_eig > zero_tol;
    if !g1_positive_definite {
        warnings.push(format!("G1 is not positive definite (min eigenvalue {g1_min_eig:e})"));
    }

    let last = problem.block(m - 1);
    let pm = &config.metrics[m - 1];
    let nm = dims[m - 1];
    let last_block_min_eig = symmetric_min_eig(
        nm,
        || {
            let a = last.map.to_dense();
            pm.to_dense().add(&a.transpose().matmul(&a).scaled(rho / gamma))
        },
        |v| {
            let mut out = pm.apply(v);
            axpy(rho / gamma, &last.map.apply_adjoint(&last.map.apply(v)), &mut out);
            out
        },
    )?;
    let last_block_positive_definite = last_block_min_eig > zero_tol;
    if !last_block_positive_definite {
        warnings.push(format!(
            "P_m + (rho/gamma) A_m^T A_m is not positive definite (min eigenvalue {last_block_min_eig:e})"
        ));
    }
    let pm_min_eig = pm.min_eigenvalue()?;
    if pm_min_eig <= zero_tol {
        warnings.push(format!("P_m is not positive definite (min eigenvalue {pm_min_eig:e})"));
    }

    if config.strict_theory_mode && !(g1_positive_definite && last_block_positive_definite) {
        return Err(Error::TheoryViolation(warnings.join("; ")));
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    Ok(ConfigDiagnostics {
        gamma_in_range: true,
        first_phase_min_eigs,
        g1_min_eig,
        g1_lower_bound,
        g1_positive_definite,
        last_block_min_eig,
        last_block_positive_definite,
        pm_min_eig,
        warnings,
    })
}

fn dense_g1<T: Real>(problem: &BlockProblem<T>, config: &SolverConfig<T>) -> Result<DenseMatrix<T>> {
    let m = problem.num_blocks();
    let dims = problem.block_dims();
    let nr: usize = dims[..m - 1].iter().sum();
    let a: Vec<DenseMatrix<T>> = problem.blocks()[..m - 1].iter().map(|b| b.map.to_dense()).collect();
    let mut g1 = DenseMatrix::zeros(nr, nr);
    let mut ro = 0;
    for i in 0..m - 1 {
        let mut co = 0;
        for j in 0..m - 1 {
            let blk = if i == j {
                config.metrics[i].to_dense()
            } else {
                a[i].transpose().matmul(&a[j]).scaled(-config.rho)
            };
            g1.set_block(ro, co, &blk);
            co += dims[j];
        }
        ro += dims[i];
    }
    Ok(g1)
}

/// Recorded iterates `w^0, …, w^K` and predictors `w̄^0, …, w̄^{K−1}`.
#[derive(Debug, Clone, Default)]
pub struct Trajectory<T> {
    pub iterates: Vec<PrimalDualPoint<T>>,
    pub auxiliaries: Vec<PrimalDualPoint<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(start: PrimalDualPoint<T>) -> Self {
        Self {
            iterates: vec![start],
            auxiliaries: Vec::new(),
        }
    }

    /// Number of completed steps.
    pub fn len(&self) -> usize {
        self.auxiliaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.auxiliaries.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct IterationState<T> {
    pub k: usize,
    /// `w^k`
    pub current: PrimalDualPoint<T>,
    /// `w^{k−1}`
    pub previous: Option<PrimalDualPoint<T>>,
    /// `w̄^{k−1}`, the predictor of the last completed step.
    pub auxiliary: Option<PrimalDualPoint<T>>,
    /// `‖X_i¹ − X_i⁰‖, ‖y¹ − y⁰‖`, set by the first step.
    pub first_step_norms: Option<Vec<T>>,
    pub trajectory: Option<Trajectory<T>>,
}

impl<T: Real> IterationState<T> {
    pub fn new(start: PrimalDualPoint<T>, record: bool) -> Self {
        Self {
            k: 0,
            trajectory: record.then(|| Trajectory::new(start.clone())),
            current: start,
            previous: None,
            auxiliary: None,
            first_step_norms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport<T> {
    /// Index of the iterate produced by this step (`k + 1`).
    pub iteration: usize,
    /// `‖Σ A_i x_i^{k+1} − b‖`
    pub feasibility_residual: T,
    /// Per-component changes `x_1, …, x_m, y`, relative to the first step.
    pub successive_change: Vec<T>,
    /// Maximum of `successive_change`; the stopping quantity.
    pub epsilon: T,
    pub objective: T,
    /// `‖w^k − w^{k+1}‖_H` when tracking is enabled.
    pub h_norm_step: Option<T>,
}

/// `b + y/ρ − offset`
fn target<T: Real>(b: &[T], y: &[T], rho: T, offset: &[T]) -> Vec<T> {
    b.iter()
        .zip(y)
        .zip(offset)
        .map(|((&bi, &yi), &oi)| bi + yi / rho - oi)
        .collect()
}

fn check_config_shape<T: Real>(problem: &BlockProblem<T>, config: &SolverConfig<T>) -> Result<()> {
    check_dim("number of proximal metrics", problem.num_blocks(), config.metrics.len())?;
    for (i, (b, p)) in problem.blocks().iter().zip(&config.metrics).enumerate() {
        check_dim(format!("metric P_{}", i + 1), b.dim(), p.dim())?;
    }
    Ok(())
}

/// New `x_j^{k+1}` for every `j < m`, all from the same snapshot `w^k`.
pub fn first_phase_update<T: Real>(
    problem: &BlockProblem<T>,
    config: &SolverConfig<T>,
    current: &PrimalDualPoint<T>,
) -> Result<Vec<Vec<T>>> {
    problem.check_point(current)?;
    check_config_shape(problem, config)?;
    let m = problem.num_blocks();
    let images: Vec<Vec<T>> = problem
        .blocks()
        .iter()
        .zip(&current.primal)
        .map(|(b, x)| b.map.apply(x))
        .collect();
    let solve_one = |j: usize| -> Result<Vec<T>> {
        let mut offset = vec![T::zero(); problem.constraint_dim()];
        for (i, img) in images.iter().enumerate() {
            if i != j {
                axpy(T::one(), img, &mut offset);
            }
        }
        let v = target(problem.rhs(), &current.dual, config.rho, &offset);
        problem.solve_subproblem(j, &v, &current.primal[j], config.rho, &config.metrics[j])
    };
    if config.parallel && m > 2 {
        (0..m - 1).into_par_iter().map(solve_one).collect()
    } else {
        (0..m - 1).map(solve_one).collect()
    }
}

/// `S = Σ_{i<m} A_i x_i^{k+1}`
fn first_phase_image<T: Real>(problem: &BlockProblem<T>, fresh: &[Vec<T>]) -> Vec<T> {
    let mut s = vec![T::zero(); problem.constraint_dim()];
    for (b, x) in problem.blocks().iter().zip(fresh) {
        b.map.apply_add(T::one(), x, &mut s);
    }
    s
}

/// `γS + (1−γ)(b − A_m x_m^k)`
fn relaxed_image<T: Real>(problem: &BlockProblem<T>, gamma: T, s: &[T], am_xm: &[T]) -> Vec<T> {
    s.iter()
        .zip(problem.rhs())
        .zip(am_xm)
        .map(|((&si, &bi), &ai)| gamma * si + (T::one() - gamma) * (bi - ai))
        .collect()
}

/// `x_m^{k+1}` from the fresh first-phase blocks.
pub fn last_block_update<T: Real>(
    problem: &BlockProblem<T>,
    config: &SolverConfig<T>,
    current: &PrimalDualPoint<T>,
    fresh_first_phase: &[Vec<T>],
) -> Result<Vec<T>> {
    let m = problem.num_blocks();
    check_dim("fresh first-phase blocks", m - 1, fresh_first_phase.len())?;
    let s = first_phase_image(problem, fresh_first_phase);
    let am_xm = problem.block(m - 1).map.apply(&current.primal[m - 1]);
    last_block_from_parts(problem, config, current, &s, &am_xm)
}

fn last_block_from_parts<T: Real>(
    problem: &BlockProblem<T>,
    config: &SolverConfig<T>,
    current: &PrimalDualPoint<T>,
    s: &[T],
    am_xm: &[T],
) -> Result<Vec<T>> {
    let m = problem.num_blocks();
    let offset = relaxed_image(problem, config.gamma, s, am_xm);
    let v = target(problem.rhs(), &current.dual, config.rho, &offset);
    problem.solve_subproblem(m - 1, &v, &current.primal[m - 1], config.rho, &config.metrics[m - 1])
}

/// `y^{k+1}`; `fresh_primal` holds all of `x^{k+1}`.
pub fn multiplier_update<T: Real>(
    problem: &BlockProblem<T>,
    config: &SolverConfig<T>,
    current: &PrimalDualPoint<T>,
    fresh_primal: &[Vec<T>],
) -> Result<Vec<T>> {
    let m = problem.num_blocks();
    check_dim("fresh primal blocks", m, fresh_primal.len())?;
    let s = first_phase_image(problem, &fresh_primal[..m - 1]);
    let am = problem.block(m - 1).map.as_ref();
    Ok(multiplier_from_parts(
        problem,
        config,
        current,
        &s,
        &am.apply(&current.primal[m - 1]),
        &am.apply(&fresh_primal[m - 1]),
    ))
}

fn multiplier_from_parts<T: Real>(
    problem: &BlockProblem<T>,
    config: &SolverConfig<T>,
    current: &PrimalDualPoint<T>,
    s: &[T],
    am_xm: &[T],
    am_xm_new: &[T],
) -> Vec<T> {
    let relaxed = relaxed_image(problem, config.gamma, s, am_xm);
    current
        .dual
        .iter()
        .zip(&relaxed)
        .zip(am_xm_new)
        .zip(problem.rhs())
        .map(|(((&y, &r), &a), &b)| y - config.rho * (r + a - b))
        .collect()
}

/// `w̄^k = (x^{k+1}, y^k − ρ(S + A_m x_m^k − b))`
pub fn auxiliary_point<T: Real>(
    problem: &BlockProblem<T>,
    config: &SolverConfig<T>,
    current: &PrimalDualPoint<T>,
    fresh_primal: &[Vec<T>],
) -> Result<PrimalDualPoint<T>> {
    let m = problem.num_blocks();
    check_dim("fresh primal blocks", m, fresh_primal.len())?;
    let s = first_phase_image(problem, &fresh_primal[..m - 1]);
    let am_xm = problem.block(m - 1).map.apply(&current.primal[m - 1]);
    Ok(auxiliary_from_parts(problem, config, current, fresh_primal, &s, &am_xm))
}

fn auxiliary_from_parts<T: Real>(
    problem: &BlockProblem<T>,
    config: &SolverConfig<T>,
    current: &PrimalDualPoint<T>,
    fresh_primal: &[Vec<T>],
    s: &[T],
    am_xm: &[T],
) -> PrimalDualPoint<T> {
    let dual = current
        .dual
        .iter()
        .zip(s)
        .zip(am_xm)
        .zip(problem.rhs())
        .map(|(((&y, &si), &ai), &b)| y - config.rho * (si + ai - b))
        .collect();
    PrimalDualPoint::new(fresh_primal.to_vec(), dual)
}

/// Runs one full iteration and advances `state`.
pub fn step<T: Real>(
    problem: &BlockProblem<T>,
    config: &SolverConfig<T>,
    state: &mut IterationState<T>,
) -> Result<StepReport<T>> {
    let m = problem.num_blocks();
    let current = &state.current;
    let mut fresh = first_phase_update(problem, config, current)?;
    let s = first_phase_image(problem, &fresh);
    let am = problem.block(m - 1).map.as_ref();
    let am_xm = am.apply(&current.primal[m - 1]);
    let xm_new = last_block_from_parts(problem, config, current, &s, &am_xm)?;
    let am_xm_new = am.apply(&xm_new);
    fresh.push(xm_new);
    let y_new = multiplier_from_parts(problem, config, current, &s, &am_xm, &am_xm_new);
    let aux = auxiliary_from_parts(problem, config, current, &fresh, &s, &am_xm);
    let next = PrimalDualPoint::new(fresh, y_new);

    let iteration = state.k + 1;
    if let Some(component) = next.first_non_finite().or_else(|| aux.first_non_finite()) {
        return Err(Error::Divergence { iteration, component });
    }

    let changes: Vec<T> = next
        .components()
        .zip(current.components())
        .map(|(a, b)| linalg::dist(a, b))
        .collect();
    if let Some(i) = changes.iter().position(|c| !c.is_finite()) {
        let component = if i < m { format!("x_{}", i + 1) } else { "y".to_string() };
        return Err(Error::Divergence { iteration, component });
    }
    let feasibility_residual = linalg::norm(&problem.residual(&next.primal));
    if !feasibility_residual.is_finite() {
        return Err(Error::Divergence {
            iteration,
            component: "constraint residual".into(),
        });
    }
    let first = state.first_step_norms.get_or_insert_with(|| changes.clone());
    let floor = T::lit(STOP_DENOMINATOR_FLOOR);
    let successive_change: Vec<T> = changes
        .iter()
        .zip(first.iter())
        .map(|(&c, &d)| if d < floor { c } else { c / d })
        .collect();
    let epsilon = successive_change.iter().copied().fold(T::zero(), T::max);

    let h_norm_step = if config.track_h_norm {
        let ops = config.operators(problem)?;
        Some(ops.weighted_dist_sq(Weight::H, current, &next).max(T::zero()).sqrt())
    } else {
        None
    };

    let report = StepReport {
        iteration,
        feasibility_residual,
        successive_change,
        epsilon,
        objective: evaluate_objective(problem, &next)?,
        h_norm_step,
    };

    if let Some(traj) = state.trajectory.as_mut() {
        traj.iterates.push(next.clone());
        traj.auxiliaries.push(aux.clone());
    }
    state.previous = Some(std::mem::replace(&mut state.current, next));
    state.auxiliary = Some(aux);
    state.k = iteration;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct SolveResult<T> {
    pub point: PrimalDualPoint<T>,
    pub iterations: usize,
    /// The stopping rule fired before the iteration cap.
    pub converged: bool,
    pub final_epsilon: T,
    pub trajectory: Option<Trajectory<T>>,
    pub reports: Vec<StepReport<T>>,
    pub diagnostics: ConfigDiagnostics<T>,
}

/// Iterates until `max_i ‖X_i^{k+1} − X_i^k‖/‖X_i¹ − X_i⁰‖` (and the same for
/// `y`) drops below the tolerance, or the iteration cap is hit.
pub fn solve<T: Real>(
    problem: &BlockProblem<T>,
    config: &SolverConfig<T>,
    start: PrimalDualPoint<T>,
) -> Result<SolveResult<T>> {
    let diagnostics = validate_config(problem, config)?;
    problem.check_point(&start)?;
    if let Some(component) = start.first_non_finite() {
        return Err(Error::InvalidParameter(format!("start point has a non-finite value in {component}")));
    }
    if config.max_iterations == 0 {
        return Err(Error::InvalidParameter("max_iterations must be positive".into()));
    }
    let mut state = IterationState::new(start, config.record_trajectory);
    let mut reports = Vec::new();
    let mut converged = false;
    let mut final_epsilon = T::infinity();
    while state.k < config.max_iterations {
        let report = step(problem, config, &mut state)?;
        final_epsilon = report.epsilon;
        reports.push(report);
        if final_epsilon < config.tolerance {
            converged = true;
            break;
        }
    }
    Ok(SolveResult {
        point: state.current,
        iterations: state.k,
        converged,
        final_epsilon,
        trajectory: state.trajectory,
        reports,
        diagnostics,
    })
}
