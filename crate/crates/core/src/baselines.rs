//! Two-block reference schemes, written as their literal recursions:
//!
//! ```text
//! ADMM         x1 ← argmin ϑ1 + ρ/2‖A1x1 + A2x2 − b − y/ρ‖²
//!              x2 ← argmin ϑ2 + ρ/2‖A1x1⁺ + A2x2 − b − y/ρ‖²
//!              y  ← y − ρ(A1x1⁺ + A2x2⁺ − b)
//! GADMM        as ADMM with A1x1⁺ replaced by γA1x1⁺ + (1−γ)(b − A2x2) in the x2 and y steps
//! LGADMM(P1)   GADMM plus ½‖x1 − x1^k‖²_{P1}
//! LGADMM(P1,P2) GADMM plus both proximal terms
//! ```
//!
//! They share the block oracles with the m-block solver, so any deviation
//! between the two isolates the scheme logic.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, axpy};
use crate::problem::{BlockProblem, Metric, PrimalDualPoint};
use crate::scalar::Real;
use crate::solver::{step, IterationState, SolverConfig};

/// Deviation threshold for [`reduction_equivalence_suite`].
pub const REDUCTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[allow(non_camel_case_types)]
pub enum SchemeVariant {
    ADMM,
    GADMM,
    LGADMM_P1,
    LGADMM_P1P2,
}

#[derive(Debug, Clone)]
pub struct TwoBlockScheme<T: Real> {
    pub variant: SchemeVariant,
    pub rho: T,
    /// Ignored by [`SchemeVariant::ADMM`].
    pub gamma: T,
    pub p1: Option<Metric<T>>,
    pub p2: Option<Metric<T>>,
}

impl<T: Real> TwoBlockScheme<T> {
    pub fn admm(rho: T) -> Self {
        Self {
            variant: SchemeVariant::ADMM,
            rho,
            gamma: T::one(),
            p1: None,
            p2: None,
        }
    }

    pub fn gadmm(rho: T, gamma: T) -> Self {
        Self {
            variant: SchemeVariant::GADMM,
            rho,
            gamma,
            p1: None,
            p2: None,
        }
    }

    pub fn lgadmm_p1(rho: T, gamma: T, p1: Metric<T>) -> Self {
        Self {
            variant: SchemeVariant::LGADMM_P1,
            rho,
            gamma,
            p1: Some(p1),
            p2: None,
        }
    }

    pub fn lgadmm_p1p2(rho: T, gamma: T, p1: Metric<T>, p2: Metric<T>) -> Self {
        Self {
            variant: SchemeVariant::LGADMM_P1P2,
            rho,
            gamma,
            p1: Some(p1),
            p2: Some(p2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho.is_nan() || self.rho <= T::zero() {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {}", self.rho)));
        }
        if self.variant != SchemeVariant::ADMM && !(self.gamma > T::zero() && self.gamma < T::two()) {
            return Err(Error::InvalidParameter(format!("gamma must lie in (0, 2), got {}", self.gamma)));
        }
        let need_p1 = matches!(self.variant, SchemeVariant::LGADMM_P1 | SchemeVariant::LGADMM_P1P2);
        let need_p2 = self.variant == SchemeVariant::LGADMM_P1P2;
        if need_p1 && self.p1.is_none() {
            return Err(Error::InvalidParameter(format!("{:?} requires P1", self.variant)));
        }
        if need_p2 && self.p2.is_none() {
            return Err(Error::InvalidParameter(format!("{:?} requires P2", self.variant)));
        }
        Ok(())
    }
}

fn target<T: Real>(b: &[T], y: &[T], rho: T, offset: &[T]) -> Vec<T> {
    b.iter()
        .zip(y)
        .zip(offset)
        .map(|((&bi, &yi), &oi)| bi + yi / rho - oi)
        .collect()
}

/// One iteration of `scheme` from `w`.
pub fn baseline_step<T: Real>(
    problem: &BlockProblem<T>,
    scheme: &TwoBlockScheme<T>,
    w: &PrimalDualPoint<T>,
) -> Result<PrimalDualPoint<T>> {
    if problem.num_blocks() != 2 {
        return Err(Error::InvalidParameter(format!(
            "two-block schemes need m = 2, got m = {}",
            problem.num_blocks()
        )));
    }
    scheme.validate()?;
    problem.check_point(w)?;
    let (a1, a2) = (problem.block(0).map.as_ref(), problem.block(1).map.as_ref());
    let b = problem.rhs();
    let rho = scheme.rho;
    let zero1 = Metric::Zero(a1.input_dim());
    let zero2 = Metric::Zero(a2.input_dim());
    let p1 = scheme.p1.as_ref().unwrap_or(&zero1);
    let p2 = scheme.p2.as_ref().unwrap_or(&zero2);

    let a2x2 = a2.apply(&w.primal[1]);
    let v1 = target(b, &w.dual, rho, &a2x2);
    let x1 = problem.solve_subproblem(0, &v1, &w.primal[0], rho, p1)?;
    let a1x1 = a1.apply(&x1);

    let (x2, y) = match scheme.variant {
        SchemeVariant::ADMM => {
            let v2 = target(b, &w.dual, rho, &a1x1);
            let x2 = problem.solve_subproblem(1, &v2, &w.primal[1], rho, p2)?;
            let mut r = linalg::add(&a1x1, &a2.apply(&x2));
            axpy(-T::one(), b, &mut r);
            let mut y = w.dual.clone();
            axpy(-rho, &r, &mut y);
            (x2, y)
        }
        _ => {
            let g = scheme.gamma;
            let relaxed: Vec<T> = a1x1
                .iter()
                .zip(b)
                .zip(&a2x2)
                .map(|((&a, &bi), &c)| g * a + (T::one() - g) * (bi - c))
                .collect();
            let v2 = target(b, &w.dual, rho, &relaxed);
            let x2 = problem.solve_subproblem(1, &v2, &w.primal[1], rho, p2)?;
            let a2x2_new = a2.apply(&x2);
            let y = w
                .dual
                .iter()
                .zip(&relaxed)
                .zip(&a2x2_new)
                .zip(b)
                .map(|(((&yi, &r), &a), &bi)| yi - rho * (r + a - bi))
                .collect();
            (x2, y)
        }
    };
    Ok(PrimalDualPoint::new(vec![x1, x2], y))
}

#[derive(Debug, Clone, Serialize)]
pub struct PairDeviation {
    pub name: String,
    /// Largest `‖a − b‖_∞ / (1 + ‖a‖_∞)` over the iterations.
    pub max_deviation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionReport {
    pub iterations: usize,
    pub pairs: Vec<PairDeviation>,
    pub passed: bool,
}

fn deviation<T: Real>(a: &PrimalDualPoint<T>, b: &PrimalDualPoint<T>) -> T {
    let fa = a.to_flat();
    let fb = b.to_flat();
    let diff = fa.iter().zip(&fb).map(|(&x, &y)| (x - y).abs()).fold(T::zero(), T::max);
    if !diff.is_finite() || fa.iter().chain(&fb).any(|x| !x.is_finite()) {
        return T::infinity();
    }
    diff / (T::one() + linalg::max_abs(&fa))
}

/// Runs `iterations` steps of a baseline and of the m-block scheme from the
/// same start and records the largest per-iteration deviation.
pub fn compare_with_multiblock<T: Real>(
    problem: &BlockProblem<T>,
    scheme: &TwoBlockScheme<T>,
    start: &PrimalDualPoint<T>,
    iterations: usize,
) -> Result<T> {
    let dims = problem.block_dims();
    let metrics = vec![
        scheme.p1.clone().unwrap_or(Metric::Zero(dims[0])),
        scheme.p2.clone().unwrap_or(Metric::Zero(dims[1])),
    ];
    let gamma = if scheme.variant == SchemeVariant::ADMM { T::one() } else { scheme.gamma };
    let config = SolverConfig::new(scheme.rho, gamma, metrics).parallel(false);
    let mut state = IterationState::new(start.clone(), false);
    let mut w = start.clone();
    let mut worst = T::zero();
    for _ in 0..iterations {
        w = baseline_step(problem, scheme, &w)?;
        step(problem, &config, &mut state)?;
        worst = worst.max(deviation(&w, &state.current));
    }
    Ok(worst)
}

fn compare_baselines<T: Real>(
    problem: &BlockProblem<T>,
    a: &TwoBlockScheme<T>,
    b: &TwoBlockScheme<T>,
    start: &PrimalDualPoint<T>,
    iterations: usize,
) -> Result<T> {
    let (mut wa, mut wb) = (start.clone(), start.clone());
    let mut worst = T::zero();
    for _ in 0..iterations {
        wa = baseline_step(problem, a, &wa)?;
        wb = baseline_step(problem, b, &wb)?;
        worst = worst.max(deviation(&wa, &wb));
    }
    Ok(worst)
}

/// Checks every reduction between the schemes:
/// ADMM ≡ m-block(γ=1, P=0), GADMM ≡ m-block(P=0), LGADMM(P1) ≡ m-block(P2=0),
/// LGADMM(P1,P2) ≡ m-block, plus GADMM(γ=1) ≡ ADMM and LGADMM(P1=0) ≡ GADMM.
pub fn reduction_equivalence_suite<T: Real>(
    problem: &BlockProblem<T>,
    rho: T,
    gamma: T,
    p1: Metric<T>,
    p2: Metric<T>,
    start: &PrimalDualPoint<T>,
    iterations: usize,
) -> Result<ReductionReport> {
    let dims = problem.block_dims();
    if dims.len() != 2 {
        return Err(Error::InvalidParameter(format!("two-block schemes need m = 2, got m = {}", dims.len())));
    }
    let tol = T::lit(REDUCTION_TOL);
    let mut pairs = Vec::new();
    let mut push = |name: &str, dev: T| {
        pairs.push(PairDeviation {
            name: name.into(),
            max_deviation: dev.as_f64(),
            passed: dev <= tol,
        });
    };
    push(
        "ADMM vs m-block (gamma=1, P=0)",
        compare_with_multiblock(problem, &TwoBlockScheme::admm(rho), start, iterations)?,
    );
    push(
        "GADMM vs m-block (P=0)",
        compare_with_multiblock(problem, &TwoBlockScheme::gadmm(rho, gamma), start, iterations)?,
    );
    push(
        "LGADMM(P1) vs m-block (P2=0)",
        compare_with_multiblock(problem, &TwoBlockScheme::lgadmm_p1(rho, gamma, p1.clone()), start, iterations)?,
    );
    push(
        "LGADMM(P1,P2) vs m-block",
        compare_with_multiblock(
            problem,
            &TwoBlockScheme::lgadmm_p1p2(rho, gamma, p1.clone(), p2.clone()),
            start,
            iterations,
        )?,
    );
    push(
        "GADMM (gamma=1) vs ADMM",
        compare_baselines(problem, &TwoBlockScheme::gadmm(rho, T::one()), &TwoBlockScheme::admm(rho), start, iterations)?,
    );
    push(
        "LGADMM(P1=0) vs GADMM",
        compare_baselines(
            problem,
            &TwoBlockScheme::lgadmm_p1(rho, gamma, Metric::Zero(dims[0])),
            &TwoBlockScheme::gadmm(rho, gamma),
            start,
            iterations,
        )?,
    );
    push(
        "LGADMM(P1) vs LGADMM(P1,P2=0)",
        compare_baselines(
            problem,
            &TwoBlockScheme::lgadmm_p1(rho, gamma, p1.clone()),
            &TwoBlockScheme::lgadmm_p1p2(rho, gamma, p1, Metric::Zero(dims[1])),
            start,
            iterations,
        )?,
    );
    let passed = pairs.iter().all(|p| p.passed);
    Ok(ReductionReport {
        iterations,
        pairs,
        passed,
    })
}
