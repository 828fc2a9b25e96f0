use lgadmm::metrics::DENSE_CAP;
use lgadmm::random::{random_metric, random_quadratic_problem, random_spd};
use lgadmm::{sigma_gamma, Matrix, Metric, MetricMatrices, Point, Problem, Weight};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

fn random_config(seed: u64) -> (Problem, Vec<Metric<f64>>, f64, f64) {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let m = rng.gen_range(2..=3);
    let p: Problem = random_quadratic_problem(&mut rng, m, 4).unwrap();
    let metrics = p.block_dims().iter().map(|&d| random_metric(&mut rng, d)).collect();
    let gamma = [0.3, 1.0, 1.7][rng.gen_range(0..3)];
    let rho = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
    (p, metrics, rho, gamma)
}

fn random_point(p: &Problem, rng: &mut impl Rng) -> Point {
    let primal = p
        .block_dims()
        .iter()
        .map(|&d| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let dual = (0..p.constraint_dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Point::new(primal, dual)
}

fn nalgebra_min_eig(m: &Matrix) -> f64 {
    let d = DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    let d = (&d + d.transpose()) * 0.5;
    d.symmetric_eigenvalues().min()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn q_equals_hm(seed in any::<u64>()) {
        let (p, metrics, rho, gamma) = random_config(seed);
        let mm = MetricMatrices::assemble(&p, &metrics, rho, gamma, DENSE_CAP).unwrap();
        prop_assert!(mm.q_minus_hm() <= 1e-12, "max |Q - HM| = {:e}", mm.q_minus_hm());
    }

    #[test]
    fn both_routes_to_n_agree(seed in any::<u64>()) {
        let (p, metrics, rho, gamma) = random_config(seed);
        let mm = MetricMatrices::assemble(&p, &metrics, rho, gamma, DENSE_CAP).unwrap();
        prop_assert!(mm.n_routes_gap() <= 1e-12, "gap {:e}", mm.n_routes_gap());
        prop_assert!(mm.h.is_symmetric(0.0));
        prop_assert!(mm.n.is_symmetric(0.0));
    }

    #[test]
    fn h_and_n_definite_when_g1_is(seed in any::<u64>()) {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let m = rng.gen_range(2..=3);
        let p: Problem = random_quadratic_problem(&mut rng, m, 4).unwrap();
        let gamma = rng.gen_range(0.05..1.95);
        let rho = rng.gen_range(0.2..2.0);
        // Large diagonal shift pushes G1 towards definiteness but not always.
        let metrics: Vec<Metric<f64>> = p
            .block_dims()
            .iter()
            .map(|&d| {
                let shift = rng.gen_range(0.0..4.0);
                Metric::Dense(random_spd(&mut rng, d, shift))
            })
            .collect();
        let mm = MetricMatrices::assemble(&p, &metrics, rho, gamma, DENSE_CAP).unwrap();
        let g1 = nalgebra_min_eig(&mm.g1);
        let pm = metrics.last().unwrap().min_eigenvalue().unwrap();
        if g1 > 1e-10 {
            prop_assert!(nalgebra_min_eig(&mm.h) > 0.0);
            if pm > 1e-10 {
                prop_assert!(nalgebra_min_eig(&mm.n) > 0.0);
            }
        }
    }

    #[test]
    fn matrix_free_norms_match_dense(seed in any::<u64>()) {
        let (p, metrics, rho, gamma) = random_config(seed);
        let mm = MetricMatrices::assemble(&p, &metrics, rho, gamma, DENSE_CAP).unwrap();
        let ops = lgadmm::MetricOperators::new(&p, &metrics, rho, gamma).unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ 0x5eed);
        let v = random_point(&p, &mut rng);
        let flat = v.to_flat();
        for which in [Weight::H, Weight::N, Weight::G1, Weight::Pm] {
            let dense = mm.weight(which, &p).quadratic_form(&flat);
            let free = ops.weighted_norm_sq(which, &v);
            let scale = 1.0 + dense.abs().max(free.abs());
            prop_assert!((dense - free).abs() <= 1e-12 * scale, "{:?}: {} vs {}", which, dense, free);
        }
    }

    #[test]
    fn eigen_matches_nalgebra(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let a = Matrix::from_row_major(n, n, data).unwrap().symmetrized();
        let ours = a.symmetric_eigen().unwrap();
        let d = DMatrix::from_row_slice(n, n, a.as_slice());
        let mut theirs: Vec<f64> = d.symmetric_eigenvalues().iter().copied().collect();
        theirs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in ours.values.iter().zip(&theirs) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }
        prop_assert!(ours.reconstruct_with(|l| l).max_abs_diff(&a) <= 1e-12 * (1.0 + a.max_abs()));
    }

    #[test]
    fn sigma_gamma_in_unit_interval(gamma in 1e-6f64..(2.0 - 1e-6)) {
        let s = sigma_gamma(gamma).unwrap();
        prop_assert!(s > 0.0 && s <= 1.0);
        if gamma <= 1.0 {
            prop_assert_eq!(s, 1.0);
        }
    }
}

#[test]
fn unit_dual_h_norm() {
    let (p, _, _, _) = random_config(3);
    let metrics: Vec<Metric<f64>> = p.block_dims().iter().map(|&d| Metric::scaled_identity(d, 1.0)).collect();
    let ops = lgadmm::MetricOperators::new(&p, &metrics, 1.0, 1.0).unwrap();
    let mut v = Point::zeros(&p);
    v.dual[0] = 1.0;
    assert_eq!(ops.weighted_norm_sq(Weight::H, &v), 1.0);
    assert_eq!(ops.weighted_norm_sq(Weight::H, &Point::zeros(&p)), 0.0);
}

#[test]
fn sigma_gamma_is_continuous_at_one() {
    let below: f64 = sigma_gamma(1.0 - 1e-9).unwrap();
    let above = sigma_gamma(1.0 + 1e-9).unwrap();
    assert!((below - above).abs() < 1e-8);
}
