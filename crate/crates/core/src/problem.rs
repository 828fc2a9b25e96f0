//! The m-block separable program
//!
//! ```text
//! min  Σ ϑ_i(x_i)   s.t.  Σ A_i x_i = b,  x_i ∈ X_i
//! ```
//!
//! together with its variational-inequality form: `w = (x_1, …, x_m, y)` and
//! `F(w) = (−A_1ᵀy, …, −A_mᵀy, Σ A_i x_i − b)`.
//!
//! Linear maps are abstract operators with adjoints. Dense realizations are
//! only produced on request (certificates at small dimension).

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, axpy, dot, norm, DenseMatrix};
use crate::scalar::Real;

/// A linear operator `A: R^n -> R^l` together with its adjoint.
pub trait LinearMap<T: Real>: Send + Sync + Debug {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// `A x`
    fn apply(&self, x: &[T]) -> Vec<T>;

    /// `A^T y`
    fn apply_adjoint(&self, y: &[T]) -> Vec<T>;

    /// `out += alpha * A x`
    fn apply_add(&self, alpha: T, x: &[T], out: &mut [T]) {
        axpy(alpha, &self.apply(x), out);
    }

    /// Dense realization, column by column.
    fn to_dense(&self) -> DenseMatrix<T> {
        let (n, l) = (self.input_dim(), self.output_dim());
        let mut m = DenseMatrix::zeros(l, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            let col = self.apply(&e);
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
            e[j] = T::zero();
        }
        m
    }

    /// `||A^T A||_2`, estimated by power iteration.
    fn gram_norm(&self) -> T {
        linalg::power_iteration_psd(self.input_dim(), |v| self.apply_adjoint(&self.apply(v)))
    }
}

/// Linear map backed by a dense `l x n` matrix.
#[derive(Debug, Clone)]
pub struct DenseMap<T> {
    matrix: DenseMatrix<T>,
}

impl<T: Real> DenseMap<T> {
    pub fn new(matrix: DenseMatrix<T>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.matrix
    }
}

impl<T: Real> LinearMap<T> for DenseMap<T> {
    fn input_dim(&self) -> usize {
        self.matrix.cols()
    }

    fn output_dim(&self) -> usize {
        self.matrix.rows()
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.matrix.matvec(x)
    }

    fn apply_adjoint(&self, y: &[T]) -> Vec<T> {
        self.matrix.matvec_transpose(y)
    }

    fn to_dense(&self) -> DenseMatrix<T> {
        self.matrix.clone()
    }
}

/// Symmetric proximal metric `P` used in `½‖x − x^k‖²_P`.
#[derive(Debug, Clone)]
pub enum Metric<T: Real> {
    /// `P = 0`: no proximal term.
    Zero(usize),
    /// `P = s I`.
    ScaledIdentity { dim: usize, scale: T },
    Dense(DenseMatrix<T>),
    /// `P = τ I − ρ AᵀA`, applied matrix-free.
    Linearized {
        tau: T,
        rho: T,
        map: Arc<dyn LinearMap<T>>,
    },
}

impl<T: Real> Metric<T> {
    pub fn scaled_identity(dim: usize, scale: T) -> Self {
        Metric::ScaledIdentity { dim, scale }
    }

    pub fn dim(&self) -> usize {
        match self {
            Metric::Zero(d) => *d,
            Metric::ScaledIdentity { dim, .. } => *dim,
            Metric::Dense(m) => m.rows(),
            Metric::Linearized { map, .. } => map.input_dim(),
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        match self {
            Metric::Zero(d) => vec![T::zero(); *d],
            Metric::ScaledIdentity { scale, .. } => linalg::scale(*scale, x),
            Metric::Dense(m) => m.matvec(x),
            Metric::Linearized { tau, rho, map } => {
                let mut out = linalg::scale(*tau, x);
                let gram = map.apply_adjoint(&map.apply(x));
                axpy(-*rho, &gram, &mut out);
                out
            }
        }
    }

    /// `xᵀ P x`
    pub fn quadratic_form(&self, x: &[T]) -> T {
        match self {
            Metric::Zero(_) => T::zero(),
            Metric::ScaledIdentity { scale, .. } => *scale * linalg::norm_sq(x),
            _ => dot(x, &self.apply(x)),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        match self {
            Metric::Zero(d) => DenseMatrix::zeros(*d, *d),
            Metric::ScaledIdentity { dim, scale } => DenseMatrix::scaled_identity(*dim, *scale),
            Metric::Dense(m) => m.clone(),
            Metric::Linearized { tau, rho, map } => {
                let a = map.to_dense();
                DenseMatrix::scaled_identity(map.input_dim(), *tau)
                    .sub(&a.transpose().matmul(&a).scaled(*rho))
            }
        }
    }

    /// `Some(s)` when the metric is `s I` (including `P = 0`).
    pub fn as_scaled_identity(&self) -> Option<T> {
        match self {
            Metric::Zero(_) => Some(T::zero()),
            Metric::ScaledIdentity { scale, .. } => Some(*scale),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Metric::Zero(_))
    }

    /// Smallest eigenvalue; exact for the structured variants, dense
    /// eigendecomposition for `Dense`, `τ − ρ‖AᵀA‖₂` for `Linearized`.
    pub fn min_eigenvalue(&self) -> Result<T> {
        match self {
            Metric::Zero(_) => Ok(T::zero()),
            Metric::ScaledIdentity { scale, .. } => Ok(*scale),
            Metric::Dense(m) => m.min_eigenvalue(),
            Metric::Linearized { tau, rho, map } => Ok(*tau - *rho * map.gram_norm()),
        }
    }
}

/// Objective `ϑ_i`, feasible set `X_i` and the subproblem solver of one block.
pub trait BlockFunction<T: Real>: Send + Sync + Debug {
    /// `ϑ_i(x)`
    fn value(&self, x: &[T]) -> T;

    /// `argmin_{x ∈ X_i} ϑ_i(x) + (ρ/2)‖A x − v‖² + ½‖x − center‖²_P`
    fn subproblem(
        &self,
        map: &dyn LinearMap<T>,
        v: &[T],
        center: &[T],
        rho: T,
        metric: &Metric<T>,
    ) -> Result<Vec<T>>;

    /// `argmin_{x ∈ X_i} ϑ_i(x) + (τ/2)‖x − t‖²`
    fn prox(&self, t: &[T], tau: T) -> Result<Vec<T>>;

    /// Euclidean projection onto `X_i`; `None` when `X_i` is the whole space.
    fn project(&self, x: &[T]) -> Option<Vec<T>> {
        let _ = x;
        None
    }
}

/// Convex quadratic `ϑ(x) = ½ xᵀKx + cᵀx` on the whole space. Subproblems
/// are solved exactly by a dense linear solve, so keep dimensions small.
#[derive(Debug, Clone)]
pub struct QuadraticBlock<T> {
    hessian: DenseMatrix<T>,
    linear: Vec<T>,
}

impl<T: Real> QuadraticBlock<T> {
    pub fn new(hessian: DenseMatrix<T>, linear: Vec<T>) -> Result<Self> {
        check_dim("quadratic block linear term", hessian.rows(), linear.len())?;
        if !hessian.is_symmetric(T::lit(1e-12) * (T::one() + hessian.max_abs())) {
            return Err(Error::InvalidParameter("quadratic block Hessian must be symmetric".into()));
        }
        Ok(Self { hessian, linear })
    }

    /// `ϑ ≡ 0`
    pub fn zero(dim: usize) -> Self {
        Self {
            hessian: DenseMatrix::zeros(dim, dim),
            linear: vec![T::zero(); dim],
        }
    }

    /// `ϑ(x) = s ‖x‖²`, i.e. `K = 2s I`.
    pub fn scaled_square(dim: usize, s: T) -> Self {
        Self {
            hessian: DenseMatrix::scaled_identity(dim, T::two() * s),
            linear: vec![T::zero(); dim],
        }
    }
}

impl<T: Real> BlockFunction<T> for QuadraticBlock<T> {
    fn value(&self, x: &[T]) -> T {
        T::half() * self.hessian.quadratic_form(x) + dot(&self.linear, x)
    }

    fn subproblem(
        &self,
        map: &dyn LinearMap<T>,
        v: &[T],
        center: &[T],
        rho: T,
        metric: &Metric<T>,
    ) -> Result<Vec<T>> {
        let a = map.to_dense();
        let lhs = self
            .hessian
            .add(&a.transpose().matmul(&a).scaled(rho))
            .add(&metric.to_dense());
        let mut rhs = linalg::scale(rho, &map.apply_adjoint(v));
        axpy(T::one(), &metric.apply(center), &mut rhs);
        axpy(-T::one(), &self.linear, &mut rhs);
        lhs.solve(&rhs)
    }

    fn prox(&self, t: &[T], tau: T) -> Result<Vec<T>> {
        let n = t.len();
        let lhs = self.hessian.add(&DenseMatrix::scaled_identity(n, tau));
        let mut rhs = linalg::scale(tau, t);
        axpy(-T::one(), &self.linear, &mut rhs);
        lhs.solve(&rhs)
    }
}

/// One block of the program: its constraint map and its function/set.
#[derive(Debug, Clone)]
pub struct BlockSpec<T: Real> {
    pub map: Arc<dyn LinearMap<T>>,
    pub function: Arc<dyn BlockFunction<T>>,
}

impl<T: Real> BlockSpec<T> {
    pub fn new(map: Arc<dyn LinearMap<T>>, function: Arc<dyn BlockFunction<T>>) -> Self {
        Self { map, function }
    }

    pub fn dim(&self) -> usize {
        self.map.input_dim()
    }
}

/// The m-block program. Immutable after construction.
#[derive(Debug, Clone)]
pub struct BlockProblem<T: Real> {
    blocks: Vec<BlockSpec<T>>,
    rhs: Vec<T>,
}

impl<T: Real> BlockProblem<T> {
    pub fn new(blocks: Vec<BlockSpec<T>>, rhs: Vec<T>) -> Result<Self> {
        if blocks.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least two blocks, got {}",
                blocks.len()
            )));
        }
        for (i, b) in blocks.iter().enumerate() {
            check_dim(format!("output rows of A_{}", i + 1), rhs.len(), b.map.output_dim())?;
        }
        Ok(Self { blocks, rhs })
    }

    pub fn blocks(&self) -> &[BlockSpec<T>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &BlockSpec<T> {
        &self.blocks[i]
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn rhs(&self) -> &[T] {
        &self.rhs
    }

    /// `l`, the number of linear constraints.
    pub fn constraint_dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(BlockSpec::dim).collect()
    }

    /// `n = Σ n_i`
    pub fn primal_dim(&self) -> usize {
        self.blocks.iter().map(BlockSpec::dim).sum()
    }

    /// `n + l`, the dimension of `w`.
    pub fn full_dim(&self) -> usize {
        self.primal_dim() + self.constraint_dim()
    }

    pub fn check_point(&self, point: &PrimalDualPoint<T>) -> Result<()> {
        check_dim("number of primal blocks", self.num_blocks(), point.primal.len())?;
        for (i, (b, x)) in self.blocks.iter().zip(&point.primal).enumerate() {
            check_dim(format!("block x_{}", i + 1), b.dim(), x.len())?;
        }
        check_dim("dual y", self.constraint_dim(), point.dual.len())
    }

    /// `Σ A_i x_i − b`
    pub fn residual(&self, primal: &[Vec<T>]) -> Vec<T> {
        let mut r: Vec<T> = self.rhs.iter().map(|&b| -b).collect();
        for (b, x) in self.blocks.iter().zip(primal) {
            b.map.apply_add(T::one(), x, &mut r);
        }
        r
    }

    /// Runs block `i`'s subproblem oracle, tagging failures with the block index.
    pub fn solve_subproblem(
        &self,
        i: usize,
        v: &[T],
        center: &[T],
        rho: T,
        metric: &Metric<T>,
    ) -> Result<Vec<T>> {
        let b = &self.blocks[i];
        let out = b
            .function
            .subproblem(b.map.as_ref(), v, center, rho, metric)
            .map_err(|e| Error::Oracle {
                block: i + 1,
                message: e.to_string(),
            })?;
        check_dim(format!("oracle output of block {}", i + 1), b.dim(), out.len())?;
        Ok(out)
    }

    /// Projects every block onto its set; the dual part is left untouched.
    pub fn project(&self, point: &PrimalDualPoint<T>) -> PrimalDualPoint<T> {
        let primal = self
            .blocks
            .iter()
            .zip(&point.primal)
            .map(|(b, x)| b.function.project(x).unwrap_or_else(|| x.clone()))
            .collect();
        PrimalDualPoint {
            primal,
            dual: point.dual.clone(),
        }
    }

    /// Euclidean distance of the primal part from `X_1 × … × X_m`.
    pub fn distance_to_feasible_set(&self, point: &PrimalDualPoint<T>) -> T {
        let p = self.project(point);
        point.distance(&p)
    }
}

/// `w = (x_1, …, x_m, y)`
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualPoint<T> {
    pub primal: Vec<Vec<T>>,
    pub dual: Vec<T>,
}

impl<T: Real> PrimalDualPoint<T> {
    pub fn new(primal: Vec<Vec<T>>, dual: Vec<T>) -> Self {
        Self { primal, dual }
    }

    pub fn zeros(problem: &BlockProblem<T>) -> Self {
        Self {
            primal: problem.block_dims().into_iter().map(|d| vec![T::zero(); d]).collect(),
            dual: vec![T::zero(); problem.constraint_dim()],
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.primal.len()
    }

    /// Components as slices: `x_1, …, x_m, y`.
    pub fn components(&self) -> impl Iterator<Item = &[T]> {
        self.primal
            .iter()
            .map(Vec::as_slice)
            .chain(std::iter::once(self.dual.as_slice()))
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.components().flat_map(|c| c.iter().copied()).collect()
    }

    pub fn from_flat(block_dims: &[usize], flat: &[T]) -> Result<Self> {
        let n: usize = block_dims.iter().sum();
        if flat.len() < n {
            return Err(Error::DimensionMismatch {
                context: "flat point".into(),
                expected: n,
                found: flat.len(),
            });
        }
        let mut off = 0;
        let primal = block_dims
            .iter()
            .map(|&d| {
                let v = flat[off..off + d].to_vec();
                off += d;
                v
            })
            .collect();
        Ok(Self {
            primal,
            dual: flat[off..].to_vec(),
        })
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        let comb = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect::<Vec<T>>();
        Self {
            primal: self
                .primal
                .iter()
                .zip(&other.primal)
                .map(|(a, b)| comb(a, b))
                .collect(),
            dual: comb(&self.dual, &other.dual),
        }
    }

    /// `self − other`
    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            primal: self.primal.iter().map(|x| linalg::scale(s, x)).collect(),
            dual: linalg::scale(s, &self.dual),
        }
    }

    pub fn inner(&self, other: &Self) -> T {
        self.components().zip(other.components()).map(|(a, b)| dot(a, b)).sum()
    }

    pub fn norm(&self) -> T {
        self.inner(self).sqrt()
    }

    pub fn distance(&self, other: &Self) -> T {
        self.components()
            .zip(other.components())
            .map(|(a, b)| {
                let d = linalg::dist(a, b);
                d * d
            })
            .sum::<T>()
            .sqrt()
    }

    /// Name of the first component holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<String> {
        for (i, x) in self.primal.iter().enumerate() {
            if !linalg::all_finite(x) {
                return Some(format!("x_{}", i + 1));
            }
        }
        if !linalg::all_finite(&self.dual) {
            return Some("y".into());
        }
        None
    }
}

/// `F(w)` split into its primal and constraint parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ViOperatorValue<T> {
    /// `−A_iᵀ y` for each block.
    pub block_parts: Vec<Vec<T>>,
    /// `Σ A_i x_i − b`
    pub constraint_part: Vec<T>,
}

impl<T: Real> ViOperatorValue<T> {
    pub fn as_point(&self) -> PrimalDualPoint<T> {
        PrimalDualPoint::new(self.block_parts.clone(), self.constraint_part.clone())
    }
}

/// `ϑ(u) = Σ ϑ_i(x_i)`
pub fn evaluate_objective<T: Real>(problem: &BlockProblem<T>, point: &PrimalDualPoint<T>) -> Result<T> {
    problem.check_point(point)?;
    Ok(problem
        .blocks()
        .iter()
        .zip(&point.primal)
        .map(|(b, x)| b.function.value(x))
        .sum())
}

/// `‖Σ A_i x_i − b‖`
pub fn primal_feasibility<T: Real>(problem: &BlockProblem<T>, point: &PrimalDualPoint<T>) -> Result<T> {
    problem.check_point(point)?;
    Ok(norm(&problem.residual(&point.primal)))
}

pub fn vi_operator<T: Real>(problem: &BlockProblem<T>, point: &PrimalDualPoint<T>) -> Result<ViOperatorValue<T>> {
    problem.check_point(point)?;
    let block_parts = problem
        .blocks()
        .iter()
        .map(|b| linalg::scale(-T::one(), &b.map.apply_adjoint(&point.dual)))
        .collect();
    Ok(ViOperatorValue {
        block_parts,
        constraint_part: problem.residual(&point.primal),
    })
}

/// `(w1 − w2)ᵀ(F(w1) − F(w2))`. The affine part of `F` is skew-symmetric,
/// so this vanishes up to rounding for every conforming pair.
pub fn vi_monotone_gap<T: Real>(
    problem: &BlockProblem<T>,
    w1: &PrimalDualPoint<T>,
    w2: &PrimalDualPoint<T>,
) -> Result<T> {
    let f1 = vi_operator(problem, w1)?.as_point();
    let f2 = vi_operator(problem, w2)?.as_point();
    Ok(w1.sub(w2).inner(&f1.sub(&f2)))
}

/// `P = τI − ρAᵀA`, which turns the block subproblem into a plain prox of
/// `ϑ_i` at [`linearized_prox_point`]. Requires `τ > ρ‖AᵀA‖₂`.
pub fn make_linearized_metric<T: Real>(map: Arc<dyn LinearMap<T>>, rho: T, tau: T) -> Result<Metric<T>> {
    if rho.is_nan() || rho <= T::zero() {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let threshold = rho * map.gram_norm();
    // The power-iteration estimate carries a relative error of ~1e-8.
    if tau <= threshold * (T::one() + T::lit(1e-8)) {
        return Err(Error::BelowSpectralThreshold {
            tau: tau.as_f64(),
            threshold: threshold.as_f64(),
        });
    }
    Ok(Metric::Linearized { tau, rho, map })
}

/// `t = x^k + (ρ/τ) Aᵀ(v − A x^k)`: the prox centre of the linearized
/// subproblem with target `v` (scaled-dual form).
pub fn linearized_prox_point<T: Real>(map: &dyn LinearMap<T>, rho: T, tau: T, center: &[T], v: &[T]) -> Vec<T> {
    let ax = map.apply(center);
    let r = linalg::sub(v, &ax);
    let mut t = center.to_vec();
    axpy(rho / tau, &map.apply_adjoint(&r), &mut t);
    t
}

/// Relative adjoint mismatch `|⟨Ax, y⟩ − ⟨x, Aᵀy⟩| / (‖Ax‖‖y‖ + ‖x‖‖Aᵀy‖)`.
pub fn adjoint_mismatch<T: Real>(map: &dyn LinearMap<T>, x: &[T], y: &[T]) -> T {
    let ax = map.apply(x);
    let aty = map.apply_adjoint(y);
    let lhs = dot(&ax, y);
    let rhs = dot(x, &aty);
    let scale = norm(&ax) * norm(y) + norm(x) * norm(&aty);
    if scale == T::zero() {
        (lhs - rhs).abs()
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// Smallest singular value of a dense realization of `A` (full-column-rank
/// diagnostic; O(n³)).
pub fn smallest_singular_value<T: Real>(map: &dyn LinearMap<T>) -> Result<T> {
    let a = map.to_dense();
    let lam = a.transpose().matmul(&a).min_eigenvalue()?;
    Ok(lam.max(T::zero()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_map(a: f64) -> Arc<dyn LinearMap<f64>> {
        Arc::new(DenseMap::new(DenseMatrix::from_rows(&[vec![a]])))
    }

    fn two_scalar_blocks(b: f64, f: QuadraticBlock<f64>) -> BlockProblem<f64> {
        let blocks = (0..2)
            .map(|_| BlockSpec::new(scalar_map(1.0), Arc::new(f.clone()) as Arc<dyn BlockFunction<f64>>))
            .collect();
        BlockProblem::new(blocks, vec![b]).unwrap()
    }

    #[test]
    fn objective_of_squares() {
        let p = two_scalar_blocks(0.0, QuadraticBlock::scaled_square(1, 1.0));
        let w = PrimalDualPoint::new(vec![vec![1.0], vec![2.0]], vec![0.0]);
        assert_eq!(evaluate_objective(&p, &w).unwrap(), 5.0);
    }

    #[test]
    fn feasibility_of_scalar_pair() {
        let p = two_scalar_blocks(3.0, QuadraticBlock::zero(1));
        let w = PrimalDualPoint::new(vec![vec![1.0], vec![1.0]], vec![0.0]);
        assert_eq!(primal_feasibility(&p, &w).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch_names_block() {
        let p = two_scalar_blocks(0.0, QuadraticBlock::zero(1));
        let w = PrimalDualPoint::new(vec![vec![1.0], vec![2.0, 3.0]], vec![0.0]);
        let err = evaluate_objective(&p, &w).unwrap_err();
        assert!(err.to_string().contains("x_2"), "{err}");
    }

    #[test]
    fn single_block_is_rejected() {
        let b = BlockSpec::new(scalar_map(1.0), Arc::new(QuadraticBlock::<f64>::zero(1)) as Arc<_>);
        assert!(BlockProblem::new(vec![b], vec![0.0]).is_err());
    }

    #[test]
    fn monotone_gap_hand_example() {
        let p = two_scalar_blocks(0.0, QuadraticBlock::zero(1));
        let w1 = PrimalDualPoint::new(vec![vec![1.0], vec![0.0]], vec![2.0]);
        let w2 = PrimalDualPoint::new(vec![vec![0.0], vec![1.0]], vec![-1.0]);
        assert_eq!(vi_monotone_gap(&p, &w1, &w2).unwrap(), 0.0);
        assert_eq!(vi_monotone_gap(&p, &w1, &w1).unwrap(), 0.0);
    }

    #[test]
    fn linearized_metric_scalar() {
        let m = make_linearized_metric(scalar_map(1.0), 1.0, 2.0).unwrap();
        assert!(m.to_dense().max_abs_diff(&DenseMatrix::from_rows(&[vec![1.0]])) < 1e-12);
    }

    #[test]
    fn linearized_metric_at_threshold_is_rejected() {
        let err = make_linearized_metric(scalar_map(1.0), 1.0, 1.0).unwrap_err();
        match err {
            Error::BelowSpectralThreshold { threshold, .. } => assert!((threshold - 1.0).abs() < 1e-6),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn quadratic_prox_matches_closed_form() {
        // ϑ(x) = x², prox with τ=2 at t=3: argmin x² + (x-3)² = 1.5
        let f: QuadraticBlock<f64> = QuadraticBlock::scaled_square(1, 1.0);
        let x = f.prox(&[3.0], 2.0).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn flat_roundtrip() {
        let w = PrimalDualPoint::new(vec![vec![1.0, 2.0], vec![3.0]], vec![4.0, 5.0]);
        let back = PrimalDualPoint::from_flat(&[2, 1], &w.to_flat()).unwrap();
        assert_eq!(back, w);
    }
}
