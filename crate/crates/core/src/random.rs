//! Seeded generators for small random programs and metrics.

use std::sync::Arc;

use rand::Rng;

use crate::error::Result;
use crate::linalg::DenseMatrix;
use crate::problem::{BlockFunction, BlockProblem, BlockSpec, DenseMap, LinearMap, Metric, QuadraticBlock};
use crate::scalar::Real;

fn uniform_matrix<T: Real, R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DenseMatrix<T> {
    let data = (0..rows * cols).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
    DenseMatrix::from_row_major(rows, cols, data).expect("shape matches")
}

/// `BᵀB / dim + shift·I` with `B` uniform on `[−1, 1)`.
pub fn random_spd<T: Real, R: Rng>(rng: &mut R, dim: usize, shift: T) -> DenseMatrix<T> {
    let b: DenseMatrix<T> = uniform_matrix(rng, dim, dim);
    let scale = T::one() / T::from_usize(dim.max(1)).unwrap();
    b.transpose()
        .matmul(&b)
        .scaled(scale)
        .add(&DenseMatrix::scaled_identity(dim, shift))
        .symmetrized()
}

/// A symmetric metric of the given dimension: dense, scaled identity or zero.
pub fn random_metric<T: Real, R: Rng>(rng: &mut R, dim: usize) -> Metric<T> {
    match rng.gen_range(0..3) {
        0 => Metric::Zero(dim),
        1 => Metric::scaled_identity(dim, T::lit(rng.gen_range(0.1..3.0))),
        _ => {
            let shift = T::lit(rng.gen_range(0.0..1.0));
            Metric::Dense(random_spd(rng, dim, shift))
        }
    }
}

/// `m` strongly convex quadratic blocks with dense maps; block dimensions in
/// `1..=max_dim`, constraint dimension in `1..=max_dim`.
pub fn random_quadratic_problem<T: Real, R: Rng>(rng: &mut R, m: usize, max_dim: usize) -> Result<BlockProblem<T>> {
    let l = rng.gen_range(1..=max_dim);
    let blocks = (0..m)
        .map(|_| -> Result<BlockSpec<T>> {
            let n = rng.gen_range(1..=max_dim);
            let a: DenseMatrix<T> = uniform_matrix(rng, l, n);
            let k = random_spd(rng, n, T::lit(0.1));
            let c = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
            Ok(BlockSpec::new(
                Arc::new(DenseMap::new(a)) as Arc<dyn LinearMap<T>>,
                Arc::new(QuadraticBlock::new(k, c)?) as Arc<dyn BlockFunction<T>>,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let b = (0..l).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
    BlockProblem::new(blocks, b)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256StarStar;

    use super::*;

    #[test]
    fn spd_is_positive() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(9);
        let s: DenseMatrix<f64> = random_spd(&mut rng, 5, 0.2);
        assert!(s.min_eigenvalue().unwrap() >= 0.2 - 1e-12);
    }

    #[test]
    fn problem_shapes_are_consistent() {
        let mut rng = Xoshiro256StarStar::seed_from_u64(1);
        for m in 2..5 {
            let p: BlockProblem<f64> = random_quadratic_problem(&mut rng, m, 4).unwrap();
            assert_eq!(p.num_blocks(), m);
            assert!(p.block_dims().iter().all(|&d| (1..=4).contains(&d)));
        }
    }
}
