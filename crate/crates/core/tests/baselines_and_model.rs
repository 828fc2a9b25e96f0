use std::sync::Arc;

use lgadmm::calibration::StackedIdentityMap;
use lgadmm::problem::{adjoint_mismatch, linearized_prox_point, make_linearized_metric, vi_monotone_gap};
use lgadmm::random::{random_metric, random_quadratic_problem, random_spd};
use lgadmm::{
    baseline_step, reduction_equivalence_suite, DenseMap, LinearMap, Matrix, Metric, Point, Problem,
    TwoBlockScheme,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

fn random_point(p: &Problem, rng: &mut impl Rng) -> Point {
    let primal = p
        .block_dims()
        .iter()
        .map(|&d| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let dual = (0..p.constraint_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Point::new(primal, dual)
}

#[test]
fn reductions_hold_on_random_pairs() {
    for seed in 0..10 {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let p: Problem = random_quadratic_problem(&mut rng, 2, 6).unwrap();
        let dims = p.block_dims();
        let p1 = Metric::Dense(random_spd(&mut rng, dims[0], 0.5));
        let p2 = Metric::Dense(random_spd(&mut rng, dims[1], 0.5));
        let gamma = rng.gen_range(0.2..1.9);
        let start = random_point(&p, &mut rng);
        let report = reduction_equivalence_suite(&p, 1.0, gamma, p1, p2, &start, 50).unwrap();
        assert!(report.passed, "seed {seed}: {report:#?}");
    }
}

#[test]
fn linearized_p1_reduces_to_prox() {
    let mut rng = Xoshiro256StarStar::seed_from_u64(77);
    let p: Problem = random_quadratic_problem(&mut rng, 2, 4).unwrap();
    let rho = 1.3;
    let a1 = p.block(0).map.clone();
    let tau = rho * a1.gram_norm() * 1.5 + 0.1;
    let p1 = make_linearized_metric(a1.clone(), rho, tau).unwrap();
    let w = random_point(&p, &mut rng);
    let next = baseline_step(&p, &TwoBlockScheme::lgadmm_p1(rho, 1.4, p1), &w).unwrap();

    let mut v: Vec<f64> = p.block(1).map.apply(&w.primal[1]).iter().map(|x| -x).collect();
    for ((vi, &b), &y) in v.iter_mut().zip(p.rhs()).zip(&w.dual) {
        *vi += b + y / rho;
    }
    let t = linearized_prox_point(a1.as_ref(), rho, tau, &w.primal[0], &v);
    let prox = p.block(0).function.prox(&t, tau).unwrap();
    let err = prox.iter().zip(&next.primal[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10, "{err:e}");
}

#[test]
fn scheme_four_equals_scheme_five_with_zero_p2() {
    let mut rng = Xoshiro256StarStar::seed_from_u64(4);
    let p: Problem = random_quadratic_problem(&mut rng, 2, 5).unwrap();
    let p1: Metric<f64> = random_metric(&mut rng, p.block_dims()[0]);
    let w = random_point(&p, &mut rng);
    let four = baseline_step(&p, &TwoBlockScheme::lgadmm_p1(0.9, 0.7, p1.clone()), &w).unwrap();
    let five = baseline_step(
        &p,
        &TwoBlockScheme::lgadmm_p1p2(0.9, 0.7, p1, Metric::Zero(p.block_dims()[1])),
        &w,
    )
    .unwrap();
    assert_eq!(four, five);
}

proptest! {
    #[test]
    fn dense_map_adjoint_is_consistent(seed in any::<u64>(), rows in 1usize..7, cols in 1usize..7) {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let map = DenseMap::new(Matrix::from_row_major(rows, cols, data).unwrap());
        let x: Vec<f64> = (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        prop_assert!(adjoint_mismatch(&map, &x, &y) <= 1e-14);
    }

    #[test]
    fn stacked_map_adjoint_is_consistent(seed in any::<u64>(), len in 1usize..20, k in 0usize..3) {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let map = StackedIdentityMap::new(len, lgadmm::calibration::STACK_SIGNS[k].to_vec());
        let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..3 * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        prop_assert!(adjoint_mismatch(&map, &x, &y) <= 1e-14);
    }

    #[test]
    fn vi_operator_is_monotone_with_zero_gap(seed in any::<u64>()) {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let m = rng.gen_range(2..5);
        let p: Problem = random_quadratic_problem(&mut rng, m, 4).unwrap();
        let a = random_point(&p, &mut rng);
        let b = random_point(&p, &mut rng);
        let gap = vi_monotone_gap(&p, &a, &b).unwrap();
        prop_assert!(gap.abs() <= 1e-12 * (1.0 + a.norm() * b.norm()));
    }
}

#[test]
fn linearized_metric_below_threshold_is_rejected() {
    let map: Arc<dyn LinearMap<f64>> = Arc::new(DenseMap::new(Matrix::from_rows(&[vec![1.0, 1.0]])));
    assert!(make_linearized_metric(map.clone(), 1.0, 2.0).is_err());
    let p = make_linearized_metric(map, 1.0, 2.5).unwrap();
    assert!(p.min_eigenvalue().unwrap() > 0.0);
}
