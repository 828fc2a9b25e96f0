//! The weighting matrices of the convergence analysis.
//!
//! With `R = (x_1, …, x_{m−1})` the first-phase blocks,
//!
//! ```text
//! G₁ = [P_i on the diagonal, −ρA_iᵀA_j off it]            (i, j < m)
//! Q  = [G₁ 0 0; 0 ρA_mᵀA_m+P_m (1−γ)A_mᵀ; 0 −A_m I/ρ]
//! M  = [I 0 0; 0 I 0; 0 −ρA_m γI]
//! H  = [G₁ 0 0; 0 P_m+(ρ/γ)A_mᵀA_m ((1−γ)/γ)A_mᵀ; 0 ((1−γ)/γ)A_m I/(γρ)]
//! N  = Qᵀ + Q − MᵀHM = diag(G₁, P_m, ((2−γ)/ρ) I)
//! ```
//!
//! [`MetricOperators`] applies them matrix-free on [`PrimalDualPoint`]s;
//! [`MetricMatrices`] materializes them for small problems.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, axpy, DenseMatrix};
use crate::problem::{BlockProblem, Metric, PrimalDualPoint};
use crate::scalar::Real;

/// Default cap on the dimension `n + l` for dense assembly.
pub const DENSE_CAP: usize = 5000;

/// Which weighting to use in [`MetricOperators::weighted_norm_sq`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    H,
    N,
    G1,
    Pm,
}

/// Matrix-free evaluators for `G₁, Q, M, H, N`.
#[derive(Debug, Clone, Copy)]
pub struct MetricOperators<'a, T: Real> {
    problem: &'a BlockProblem<T>,
    metrics: &'a [Metric<T>],
    rho: T,
    gamma: T,
}

impl<'a, T: Real> MetricOperators<'a, T> {
    pub fn new(problem: &'a BlockProblem<T>, metrics: &'a [Metric<T>], rho: T, gamma: T) -> Result<Self> {
        check_dim("number of proximal metrics", problem.num_blocks(), metrics.len())?;
        for (i, (b, p)) in problem.blocks().iter().zip(metrics).enumerate() {
            check_dim(format!("metric P_{}", i + 1), b.dim(), p.dim())?;
        }
        Ok(Self {
            problem,
            metrics,
            rho,
            gamma,
        })
    }

    pub fn problem(&self) -> &'a BlockProblem<T> {
        self.problem
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    fn last(&self) -> usize {
        self.problem.num_blocks() - 1
    }

    /// `G₁ d_R` on the first-phase blocks.
    pub fn apply_g1(&self, parts: &[Vec<T>]) -> Vec<Vec<T>> {
        let m1 = self.last();
        let blocks = self.problem.blocks();
        let mut sum = vec![T::zero(); self.problem.constraint_dim()];
        let images: Vec<Vec<T>> = (0..m1).map(|j| blocks[j].map.apply(&parts[j])).collect();
        for img in &images {
            axpy(T::one(), img, &mut sum);
        }
        (0..m1)
            .map(|i| {
                let others = linalg::sub(&sum, &images[i]);
                let mut out = self.metrics[i].apply(&parts[i]);
                axpy(-self.rho, &blocks[i].map.apply_adjoint(&others), &mut out);
                out
            })
            .collect()
    }

    fn am(&self) -> &dyn crate::problem::LinearMap<T> {
        self.problem.block(self.last()).map.as_ref()
    }

    pub fn apply_q(&self, d: &PrimalDualPoint<T>) -> PrimalDualPoint<T> {
        let m = self.last();
        let mut primal = self.apply_g1(&d.primal[..m]);
        let a = self.am();
        let ad = a.apply(&d.primal[m]);
        let mut xm = self.metrics[m].apply(&d.primal[m]);
        axpy(self.rho, &a.apply_adjoint(&ad), &mut xm);
        axpy(T::one() - self.gamma, &a.apply_adjoint(&d.dual), &mut xm);
        primal.push(xm);
        let mut y = linalg::scale(T::one() / self.rho, &d.dual);
        axpy(-T::one(), &ad, &mut y);
        PrimalDualPoint::new(primal, y)
    }

    pub fn apply_m(&self, d: &PrimalDualPoint<T>) -> PrimalDualPoint<T> {
        let m = self.last();
        let mut y = linalg::scale(self.gamma, &d.dual);
        axpy(-self.rho, &self.am().apply(&d.primal[m]), &mut y);
        PrimalDualPoint::new(d.primal.clone(), y)
    }

    pub fn apply_h(&self, d: &PrimalDualPoint<T>) -> PrimalDualPoint<T> {
        let m = self.last();
        let (rho, gamma) = (self.rho, self.gamma);
        let c = (T::one() - gamma) / gamma;
        let mut primal = self.apply_g1(&d.primal[..m]);
        let a = self.am();
        let ad = a.apply(&d.primal[m]);
        let mut xm = self.metrics[m].apply(&d.primal[m]);
        axpy(rho / gamma, &a.apply_adjoint(&ad), &mut xm);
        axpy(c, &a.apply_adjoint(&d.dual), &mut xm);
        primal.push(xm);
        let mut y = linalg::scale(T::one() / (gamma * rho), &d.dual);
        axpy(c, &ad, &mut y);
        PrimalDualPoint::new(primal, y)
    }

    pub fn apply_n(&self, d: &PrimalDualPoint<T>) -> PrimalDualPoint<T> {
        let m = self.last();
        let mut primal = self.apply_g1(&d.primal[..m]);
        primal.push(self.metrics[m].apply(&d.primal[m]));
        let y = linalg::scale((T::two() - self.gamma) / self.rho, &d.dual);
        PrimalDualPoint::new(primal, y)
    }

    /// `vᵀ W v` for the chosen weighting. `G1` reads only the first-phase
    /// blocks of `v`, `Pm` only `x_m`.
    pub fn weighted_norm_sq(&self, which: Weight, v: &PrimalDualPoint<T>) -> T {
        let m = self.last();
        match which {
            Weight::H => v.inner(&self.apply_h(v)),
            Weight::N => v.inner(&self.apply_n(v)),
            Weight::G1 => self
                .apply_g1(&v.primal[..m])
                .iter()
                .zip(&v.primal[..m])
                .map(|(a, b)| linalg::dot(a, b))
                .sum(),
            Weight::Pm => self.metrics[m].quadratic_form(&v.primal[m]),
        }
    }

    /// `‖a − b‖²_W`
    pub fn weighted_dist_sq(&self, which: Weight, a: &PrimalDualPoint<T>, b: &PrimalDualPoint<T>) -> T {
        self.weighted_norm_sq(which, &a.sub(b))
    }
}

/// Dense `G₁, Q, M, H` and both routes to `N`.
#[derive(Debug, Clone)]
pub struct MetricMatrices<T> {
    pub g1: DenseMatrix<T>,
    pub q: DenseMatrix<T>,
    pub m: DenseMatrix<T>,
    pub h: DenseMatrix<T>,
    /// `diag(G₁, P_m, ((2−γ)/ρ) I)`
    pub n: DenseMatrix<T>,
    /// `Qᵀ + Q − MᵀHM`
    pub n_from_product: DenseMatrix<T>,
}

impl<T: Real> MetricMatrices<T> {
    /// Literal block assembly from dense realizations of `A_i` and `P_i`.
    pub fn assemble(
        problem: &BlockProblem<T>,
        metrics: &[Metric<T>],
        rho: T,
        gamma: T,
        cap: usize,
    ) -> Result<Self> {
        check_dim("number of proximal metrics", problem.num_blocks(), metrics.len())?;
        let full = problem.full_dim();
        if full > cap {
            return Err(Error::DenseCapExceeded { dim: full, cap });
        }
        let mb = problem.num_blocks();
        let dims = problem.block_dims();
        let l = problem.constraint_dim();
        let a: Vec<DenseMatrix<T>> = problem.blocks().iter().map(|b| b.map.to_dense()).collect();
        let nr: usize = dims[..mb - 1].iter().sum();
        let nm = dims[mb - 1];

        let mut g1 = DenseMatrix::zeros(nr, nr);
        let mut ro = 0;
        for i in 0..mb - 1 {
            let mut co = 0;
            for j in 0..mb - 1 {
                let blk = if i == j {
                    metrics[i].to_dense()
                } else {
                    a[i].transpose().matmul(&a[j]).scaled(-rho)
                };
                g1.set_block(ro, co, &blk);
                co += dims[j];
            }
            ro += dims[i];
        }

        let am = &a[mb - 1];
        let amt = am.transpose();
        let gram = amt.matmul(am);
        let pm = metrics[mb - 1].to_dense();
        let eye_l = DenseMatrix::identity(l);
        let one = T::one();

        let mut q = DenseMatrix::zeros(full, full);
        q.set_block(0, 0, &g1);
        q.set_block(nr, nr, &gram.scaled(rho).add(&pm));
        q.set_block(nr, nr + nm, &amt.scaled(one - gamma));
        q.set_block(nr + nm, nr, &am.scaled(-one));
        q.set_block(nr + nm, nr + nm, &eye_l.scaled(one / rho));

        let mut mm = DenseMatrix::identity(full);
        mm.set_block(nr + nm, nr, &am.scaled(-rho));
        mm.set_block(nr + nm, nr + nm, &eye_l.scaled(gamma));

        let c = (one - gamma) / gamma;
        let mut h = DenseMatrix::zeros(full, full);
        h.set_block(0, 0, &g1);
        h.set_block(nr, nr, &pm.add(&gram.scaled(rho / gamma)));
        h.set_block(nr, nr + nm, &amt.scaled(c));
        h.set_block(nr + nm, nr, &am.scaled(c));
        h.set_block(nr + nm, nr + nm, &eye_l.scaled(one / (gamma * rho)));

        let mut n = DenseMatrix::zeros(full, full);
        n.set_block(0, 0, &g1);
        n.set_block(nr, nr, &pm);
        n.set_block(nr + nm, nr + nm, &eye_l.scaled((T::two() - gamma) / rho));

        let n_from_product = q
            .transpose()
            .add(&q)
            .sub(&mm.transpose().matmul(&h).matmul(&mm));

        Ok(Self {
            g1,
            q,
            m: mm,
            h,
            n,
            n_from_product,
        })
    }

    pub fn weight(&self, which: Weight, problem: &BlockProblem<T>) -> DenseMatrix<T> {
        match which {
            Weight::H => self.h.clone(),
            Weight::N => self.n.clone(),
            Weight::G1 => {
                let mut w = DenseMatrix::zeros(problem.full_dim(), problem.full_dim());
                w.set_block(0, 0, &self.g1);
                w
            }
            Weight::Pm => {
                let dims = problem.block_dims();
                let nr: usize = dims[..dims.len() - 1].iter().sum();
                let nm = dims[dims.len() - 1];
                let mut w = DenseMatrix::zeros(problem.full_dim(), problem.full_dim());
                for i in 0..nm {
                    for j in 0..nm {
                        w[(nr + i, nr + j)] = self.n[(nr + i, nr + j)];
                    }
                }
                w
            }
        }
    }

    /// `max |Q − HM|`
    pub fn q_minus_hm(&self) -> T {
        self.q.max_abs_diff(&self.h.matmul(&self.m))
    }

    /// `max |(Qᵀ + Q − MᵀHM) − diag(G₁, P_m, ((2−γ)/ρ)I)|`
    pub fn n_routes_gap(&self) -> T {
        self.n.max_abs_diff(&self.n_from_product)
    }
}
