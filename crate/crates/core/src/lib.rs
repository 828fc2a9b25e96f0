//! Linearized generalized ADMM for separable convex programs with `m ≥ 2` blocks:
//!
//! ```text
//! min Σ ϑ_i(x_i)  s.t.  Σ A_i x_i = b,  x_i ∈ X_i
//! ```
//!
//! The first `m − 1` blocks are updated in parallel (Jacobi), the last block
//! with a relaxation factor `γ ∈ (0, 2)`, and every subproblem carries a
//! proximal term `½‖x − x^k‖²_{P_i}`. Alongside the solver the crate ships
//! the weighting matrices of the convergence analysis, trajectory
//! certificates, the classical two-block schemes, and a correlation-matrix
//! calibration application.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix `f64`.

pub mod baselines;
pub mod calibration;
pub mod certificates;
pub mod eigen;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod random;
pub mod scalar;
pub mod solver;

pub use baselines::{baseline_step, reduction_equivalence_suite, SchemeVariant, TwoBlockScheme};
pub use calibration::{build_problem, generate_instance, project_box, project_psd, CalibrationInstance};
pub use certificates::{ergodic_average, sigma_gamma, CertificateReport, Certifier};
pub use eigen::SymmetricEigen;
pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use metrics::{MetricMatrices, MetricOperators, Weight};
pub use problem::{
    evaluate_objective, primal_feasibility, vi_operator, BlockFunction, BlockProblem, BlockSpec, DenseMap, LinearMap,
    Metric, PrimalDualPoint, QuadraticBlock,
};
pub use scalar::Real;
pub use solver::{solve, step, validate_config, IterationState, SolveResult, SolverConfig, StepReport, Trajectory};

pub type Matrix = DenseMatrix<f64>;
pub type Problem = BlockProblem<f64>;
pub type Point = PrimalDualPoint<f64>;
pub type Config = SolverConfig<f64>;
pub type Instance = CalibrationInstance<f64>;

pub type Matrix32 = DenseMatrix<f32>;
pub type Problem32 = BlockProblem<f32>;
pub type Point32 = PrimalDualPoint<f32>;
pub type Config32 = SolverConfig<f32>;
