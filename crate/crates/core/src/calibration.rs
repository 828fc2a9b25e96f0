//! Correlation-matrix calibration:
//!
//! ```text
//! min ½‖X − C‖²_F  s.t.  X ⪰ 0,  H_L ≤ X ≤ H_U
//! ```
//!
//! split into three consensus copies,
//!
//! ```text
//! min ½Σ‖X_i − C‖²_F  s.t.  X_1 − X_2 = 0,  X_1 − X_3 = 0,  X_2 − X_3 = 0 (up to sign),
//!                           X_1, X_2 ⪰ 0,  X_3 ∈ [H_L, H_U]
//! ```
//!
//! with `A_1 = [I; I; 0]`, `A_2 = [−I; 0; I]`, `A_3 = [0; −I; −I]`, `b = 0`.
//! Every `A_iᵀA_i = 2I`, so under a scalar metric `σI` each block
//! subproblem is an average followed by a projection.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};

use crate::eigen::SymmetricEigen;
use crate::error::{check_dim, Error, Result};
use crate::io::{atomic_write, read_matrix, write_matrix};
use crate::linalg::{self, DenseMatrix};
use crate::problem::{BlockFunction, BlockProblem, BlockSpec, LinearMap, Metric, PrimalDualPoint};
use crate::scalar::Real;

/// `H_U = BOX_BOUND · ones`, `H_L = −H_U`.
pub const BOX_BOUND: f64 = 0.1;

/// Default proximal scale `σ` in `P_i = σI`.
pub const DEFAULT_SIGMA: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct CalibrationInstance<T> {
    pub n: usize,
    pub c: DenseMatrix<T>,
    pub lower: DenseMatrix<T>,
    pub upper: DenseMatrix<T>,
    pub seed: u64,
}

/// `C = (Rᵀ + R) − ones + I` with `R` uniform on `[0, 1)` drawn row-major
/// from xoshiro256** seeded by `seed`.
pub fn generate_instance<T: Real>(n: usize, seed: u64) -> Result<CalibrationInstance<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("matrix order must be at least 2, got {n}")));
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let r: Vec<f64> = (0..n * n).map(|_| rng.gen::<f64>()).collect();
    let mut c = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            c[(i, j)] = T::lit(r[i * n + j] + r[j * n + i] - 1.0 + id);
        }
    }
    let bound = T::lit(BOX_BOUND);
    Ok(CalibrationInstance {
        n,
        c,
        lower: DenseMatrix::from_row_major(n, n, vec![-bound; n * n])?,
        upper: DenseMatrix::from_row_major(n, n, vec![bound; n * n])?,
        seed,
    })
}

/// `U max(Λ, 0) Uᵀ` of the symmetric part of `a`.
pub fn project_psd<T: Real>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let eig = SymmetricEigen::new(a)?;
    Ok(eig.reconstruct_with(|l| l.max(T::zero())))
}

/// Elementwise `min(max(H_L, a), H_U)`.
pub fn project_box<T: Real>(a: &DenseMatrix<T>, lower: &DenseMatrix<T>, upper: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if a.shape() != lower.shape() || a.shape() != upper.shape() {
        return Err(Error::DimensionMismatch {
            context: "box bounds".into(),
            expected: a.rows() * a.cols(),
            found: lower.rows() * lower.cols(),
        });
    }
    let mut out = a.clone();
    for ((x, &lo), &hi) in out.as_mut_slice().iter_mut().zip(lower.as_slice()).zip(upper.as_slice()) {
        if lo > hi {
            return Err(Error::InvalidParameter("lower bound exceeds upper bound".into()));
        }
        *x = x.max(lo).min(hi);
    }
    Ok(out)
}

/// `x ↦ (s_1 x, s_2 x, s_3 x)` with signs `s_k ∈ {−1, 0, 1}` on `len`-vectors.
#[derive(Debug, Clone)]
pub struct StackedIdentityMap {
    len: usize,
    signs: Vec<i8>,
}

impl StackedIdentityMap {
    pub fn new(len: usize, signs: Vec<i8>) -> Self {
        assert!(signs.iter().all(|s| (-1..=1).contains(s)));
        Self { len, signs }
    }

    /// `Σ s_k²`, so that `AᵀA = gram_scale · I`.
    pub fn gram_scale(&self) -> usize {
        self.signs.iter().filter(|&&s| s != 0).count()
    }
}

impl<T: Real> LinearMap<T> for StackedIdentityMap {
    fn input_dim(&self) -> usize {
        self.len
    }

    fn output_dim(&self) -> usize {
        self.len * self.signs.len()
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.len * self.signs.len()];
        self.apply_add(T::one(), x, &mut out);
        out
    }

    fn apply_add(&self, alpha: T, x: &[T], out: &mut [T]) {
        for (k, &s) in self.signs.iter().enumerate() {
            if s == 0 {
                continue;
            }
            let a = if s > 0 { alpha } else { -alpha };
            linalg::axpy(a, x, &mut out[k * self.len..(k + 1) * self.len]);
        }
    }

    fn apply_adjoint(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.len];
        for (k, &s) in self.signs.iter().enumerate() {
            if s == 0 {
                continue;
            }
            let a = if s > 0 { T::one() } else { -T::one() };
            linalg::axpy(a, &y[k * self.len..(k + 1) * self.len], &mut out);
        }
        out
    }

    fn gram_norm(&self) -> T {
        T::from_usize(self.gram_scale()).unwrap()
    }
}

#[derive(Debug, Clone)]
pub enum CalibrationSet<T> {
    Psd,
    Box { lower: DenseMatrix<T>, upper: DenseMatrix<T> },
}

/// `ϑ(X) = ½‖X − C‖²_F` on a PSD or box set, for maps with `AᵀA = κI`.
#[derive(Debug, Clone)]
pub struct CalibrationBlock<T> {
    n: usize,
    c: DenseMatrix<T>,
    set: CalibrationSet<T>,
    gram_scale: T,
}

impl<T: Real> CalibrationBlock<T> {
    pub fn new(c: DenseMatrix<T>, set: CalibrationSet<T>, gram_scale: T) -> Self {
        Self {
            n: c.rows(),
            c,
            set,
            gram_scale,
        }
    }

    fn as_matrix(&self, x: &[T]) -> DenseMatrix<T> {
        DenseMatrix::from_row_major(self.n, self.n, x.to_vec()).expect("block vector has n² entries")
    }

    fn project_matrix(&self, z: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        match &self.set {
            CalibrationSet::Psd => project_psd(z),
            CalibrationSet::Box { lower, upper } => project_box(z, lower, upper),
        }
    }
}

impl<T: Real> BlockFunction<T> for CalibrationBlock<T> {
    fn value(&self, x: &[T]) -> T {
        T::half() * linalg::dist(x, self.c.as_slice()).powi(2)
    }

    /// `Π((C + ρAᵀv + σ·center) / (1 + κρ + σ))`
    fn subproblem(
        &self,
        map: &dyn LinearMap<T>,
        v: &[T],
        center: &[T],
        rho: T,
        metric: &Metric<T>,
    ) -> Result<Vec<T>> {
        let sigma = metric.as_scaled_identity().ok_or_else(|| {
            Error::InvalidParameter(
                "the closed-form calibration oracle needs a scalar metric sigma*I; \
                 other metrics require a generic iterative oracle"
                    .into(),
            )
        })?;
        if sigma < T::zero() {
            return Err(Error::InvalidParameter(format!("metric scale must be nonnegative, got {sigma}")));
        }
        check_dim("calibration block center", self.n * self.n, center.len())?;
        let atv = map.apply_adjoint(v);
        let denom = T::one() + self.gram_scale * rho + sigma;
        let z: Vec<T> = self
            .c
            .as_slice()
            .iter()
            .zip(&atv)
            .zip(center)
            .map(|((&c, &a), &x)| (c + rho * a + sigma * x) / denom)
            .collect();
        Ok(self.project_matrix(&self.as_matrix(&z))?.into_vec())
    }

    /// `Π((C + τt) / (1 + τ))`
    fn prox(&self, t: &[T], tau: T) -> Result<Vec<T>> {
        let z: Vec<T> = self
            .c
            .as_slice()
            .iter()
            .zip(t)
            .map(|(&c, &ti)| (c + tau * ti) / (T::one() + tau))
            .collect();
        Ok(self.project_matrix(&self.as_matrix(&z))?.into_vec())
    }

    fn project(&self, x: &[T]) -> Option<Vec<T>> {
        self.project_matrix(&self.as_matrix(x)).ok().map(DenseMatrix::into_vec)
    }
}

/// Signs of `A_1, A_2, A_3` over the three constraint segments.
pub const STACK_SIGNS: [[i8; 3]; 3] = [[1, 1, 0], [-1, 0, 1], [0, -1, -1]];

/// The three-block consensus program for `instance`.
pub fn build_problem<T: Real>(instance: &CalibrationInstance<T>) -> Result<BlockProblem<T>> {
    let n2 = instance.n * instance.n;
    let sets = [
        CalibrationSet::Psd,
        CalibrationSet::Psd,
        CalibrationSet::Box {
            lower: instance.lower.clone(),
            upper: instance.upper.clone(),
        },
    ];
    let mut blocks = Vec::with_capacity(3);
    for (signs, set) in STACK_SIGNS.iter().zip(sets) {
        let map = StackedIdentityMap::new(n2, signs.to_vec());
        let kappa = map.gram_scale();
        verify_gram::<T>(&map, kappa)?;
        let f = CalibrationBlock::new(instance.c.clone(), set, T::from_usize(kappa).unwrap());
        blocks.push(BlockSpec::new(
            Arc::new(map) as Arc<dyn LinearMap<T>>,
            Arc::new(f) as Arc<dyn BlockFunction<T>>,
        ));
    }
    BlockProblem::new(blocks, vec![T::zero(); 3 * n2])
}

/// The closed-form oracle is exact only when `AᵀA = κI`; probe it.
fn verify_gram<T: Real>(map: &StackedIdentityMap, kappa: usize) -> Result<()> {
    let len = LinearMap::<T>::input_dim(map);
    let probe: Vec<T> = (0..len).map(|i| T::lit(1.0 + (i % 7) as f64 * 0.25)).collect();
    let back = map.apply_adjoint(&LinearMap::<T>::apply(map, &probe));
    let k = T::from_usize(kappa).unwrap();
    let err = back.iter().zip(&probe).map(|(&b, &p)| (b - k * p).abs()).fold(T::zero(), T::max);
    if err > T::lit(1e-14) * (T::one() + k) * T::lit(3.0) {
        return Err(Error::InvalidParameter(format!("stacked map is not a multiple of an isometry (error {err:e})")));
    }
    if kappa != 2 {
        return Err(Error::InvalidParameter(format!("expected A^T A = 2I, got {kappa}I")));
    }
    Ok(())
}

/// `P_1 = P_2 = P_3 = σI`
pub fn default_metrics<T: Real>(n: usize, sigma: T) -> Vec<Metric<T>> {
    vec![Metric::scaled_identity(n * n, sigma); 3]
}

/// `X_i` of `point` as `n × n` matrices.
pub fn blocks_as_matrices<T: Real>(n: usize, point: &PrimalDualPoint<T>) -> Result<Vec<DenseMatrix<T>>> {
    point
        .primal
        .iter()
        .map(|x| DenseMatrix::from_row_major(n, n, x.clone()))
        .collect()
}

/// `‖X_1 − X_2‖_F, ‖X_1 − X_3‖_F, ‖X_2 − X_3‖_F`
pub fn pairwise_gaps<T: Real>(point: &PrimalDualPoint<T>) -> [T; 3] {
    let x = &point.primal;
    [
        linalg::dist(&x[0], &x[1]),
        linalg::dist(&x[0], &x[2]),
        linalg::dist(&x[1], &x[2]),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InstanceMeta {
    pub n: usize,
    pub seed: u64,
    pub bound: f64,
}

/// Writes `C.txt` (plain-text matrix) and `instance.json` into `dir`.
pub fn save_instance<T: Real>(dir: &Path, instance: &CalibrationInstance<T>) -> Result<()> {
    let mut buf = Vec::new();
    write_matrix(&mut buf, &instance.c)?;
    atomic_write(&dir.join("C.txt"), &buf)?;
    let meta = InstanceMeta {
        n: instance.n,
        seed: instance.seed,
        bound: instance.upper.as_slice().first().map_or(BOX_BOUND, |b| b.as_f64()),
    };
    let json = serde_json::to_vec_pretty(&meta).map_err(|e| Error::Parse(e.to_string()))?;
    atomic_write(&dir.join("instance.json"), &json)
}

pub fn load_instance<T: Real>(dir: &Path) -> Result<CalibrationInstance<T>> {
    let meta: InstanceMeta = serde_json::from_slice(&std::fs::read(dir.join("instance.json"))?)
        .map_err(|e| Error::Parse(e.to_string()))?;
    let c: DenseMatrix<T> = read_matrix(std::io::BufReader::new(std::fs::File::open(dir.join("C.txt"))?))?;
    check_dim("instance matrix order", meta.n, c.rows())?;
    check_dim("instance matrix columns", meta.n, c.cols())?;
    let n2 = meta.n * meta.n;
    let bound = T::lit(meta.bound);
    Ok(CalibrationInstance {
        n: meta.n,
        c,
        lower: DenseMatrix::from_row_major(meta.n, meta.n, vec![-bound; n2])?,
        upper: DenseMatrix::from_row_major(meta.n, meta.n, vec![bound; n2])?,
        seed: meta.seed,
    })
}
