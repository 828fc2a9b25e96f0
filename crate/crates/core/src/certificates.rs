//! Trajectory certificates: the inequalities that drive the convergence
//! proofs, evaluated numerically on recorded runs.
//!
//! Every check compares two sides `lhs ≤ rhs` and records the margin
//! `rhs − lhs`; a margin passes when it is at least `−SLACK·(1 + scale)`,
//! `scale` being the largest term magnitude involved.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256StarStar;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{MetricOperators, Weight};
use crate::problem::{evaluate_objective, vi_operator, BlockProblem, PrimalDualPoint};
use crate::scalar::Real;
use crate::solver::{solve, validate_config, SolveResult, SolverConfig, Trajectory};

/// Relative slack used by every inequality check.
pub const SLACK: f64 = 1e-8;

/// Eigenvalues above this count as positive.
pub const EIG_ZERO: f64 = 1e-10;

/// `σ_γ = min{(2 − γ)/γ, 1}`
pub fn sigma_gamma<T: Real>(gamma: T) -> Result<T> {
    if !(gamma > T::zero() && gamma < T::two()) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0, 2), got {gamma}")));
    }
    Ok(((T::two() - gamma) / gamma).min(T::one()))
}

fn slack<T: Real>(scale: T) -> T {
    T::lit(SLACK) * (T::one() + scale.abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub rho: f64,
    pub gamma: f64,
    pub sigma_gamma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub check: String,
    pub iterations_checked: usize,
    /// Smallest `rhs − lhs` seen; `None` when nothing was checked.
    pub worst_margin: Option<f64>,
    /// Iteration (or probe index) attaining `worst_margin`.
    pub worst_index: Option<usize>,
    pub passed: bool,
    pub skipped_reason: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub margins: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<usize>,
    pub config: Option<ConfigEcho>,
}

impl CertificateReport {
    fn skipped(check: &str, reason: String) -> Self {
        log::info!("{check} skipped: {reason}");
        Self {
            check: check.into(),
            iterations_checked: 0,
            worst_margin: None,
            worst_index: None,
            passed: true,
            skipped_reason: Some(reason),
            margins: Vec::new(),
            failures: Vec::new(),
            config: None,
        }
    }

    /// Builds a report from `(index, lhs, rhs, scale)` tuples.
    fn from_terms<T: Real>(check: &str, terms: impl IntoIterator<Item = (usize, T, T, T)>) -> Self {
        let mut report = Self {
            check: check.into(),
            iterations_checked: 0,
            worst_margin: None,
            worst_index: None,
            passed: true,
            skipped_reason: None,
            margins: Vec::new(),
            failures: Vec::new(),
            config: None,
        };
        for (idx, lhs, rhs, scale) in terms {
            let margin = rhs - lhs;
            let ok = margin.is_finite() && margin >= -slack(scale);
            let m = margin.as_f64();
            report.iterations_checked += 1;
            report.margins.push(m);
            if !ok {
                report.passed = false;
                report.failures.push(idx);
            }
            if report.worst_margin.is_none_or(|w| m < w || m.is_nan()) {
                report.worst_margin = Some(m);
                report.worst_index = Some(idx);
            }
        }
        report
    }

    pub fn is_skipped(&self) -> bool {
        self.skipped_reason.is_some()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Evaluates the certificate inequalities for one problem and configuration.
#[derive(Debug, Clone)]
pub struct Certifier<'a, T: Real> {
    problem: &'a BlockProblem<T>,
    ops: MetricOperators<'a, T>,
    gamma: T,
    rho: T,
    gate: Option<String>,
}

impl<'a, T: Real> Certifier<'a, T> {
    /// Checks that depend on `G₁ ≻ 0` and `P_m ⪰ 0` are skipped when those fail.
    pub fn new(problem: &'a BlockProblem<T>, config: &'a SolverConfig<T>) -> Result<Self> {
        let ops = config.operators(problem)?;
        let mut relaxed = config.clone();
        relaxed.strict_theory_mode = false;
        let diag = validate_config(problem, &relaxed)?;
        let zero = T::lit(EIG_ZERO);
        let mut reasons = Vec::new();
        if diag.g1_min_eig <= zero {
            reasons.push(format!("G1 is not positive definite (min eigenvalue {:e})", diag.g1_min_eig));
        }
        if diag.pm_min_eig < -zero {
            reasons.push(format!("P_m is not positive semidefinite (min eigenvalue {:e})", diag.pm_min_eig));
        }
        if !diag.last_block_positive_definite {
            reasons.push("P_m + (rho/gamma) A_m^T A_m is not positive definite".into());
        }
        Ok(Self {
            problem,
            ops,
            gamma: config.gamma,
            rho: config.rho,
            gate: (!reasons.is_empty()).then(|| reasons.join("; ")),
        })
    }

    /// Why theory-dependent checks are skipped, if they are.
    pub fn gate(&self) -> Option<&str> {
        self.gate.as_deref()
    }

    pub fn operators(&self) -> &MetricOperators<'a, T> {
        &self.ops
    }

    fn echo(&self, mut report: CertificateReport) -> CertificateReport {
        report.config = Some(ConfigEcho {
            rho: self.rho.as_f64(),
            gamma: self.gamma.as_f64(),
            sigma_gamma: sigma_gamma(self.gamma).map(|s| s.as_f64()).unwrap_or(f64::NAN),
        });
        report
    }

    fn gated(&self, check: &str) -> Option<CertificateReport> {
        self.gate
            .as_ref()
            .map(|r| self.echo(CertificateReport::skipped(check, r.clone())))
    }

    fn h_dist(&self, a: &PrimalDualPoint<T>, b: &PrimalDualPoint<T>) -> T {
        self.ops.weighted_dist_sq(Weight::H, a, b)
    }

    /// `‖w^{k+1} − w*‖²_H ≤ ‖w^k − w*‖²_H − ‖w^k − w̄^k‖²_N` for every step.
    pub fn fejer_check(&self, traj: &Trajectory<T>, reference: &PrimalDualPoint<T>) -> Result<CertificateReport> {
        const NAME: &str = "fejer_monotonicity";
        check_trajectory(traj)?;
        if let Some(r) = self.gated(NAME) {
            return Ok(r);
        }
        let dists: Vec<T> = traj.iterates.iter().map(|w| self.h_dist(w, reference)).collect();
        let scale = dists[0];
        let terms = (0..traj.len()).map(|k| {
            let n_term = self.ops.weighted_dist_sq(Weight::N, &traj.iterates[k], &traj.auxiliaries[k]);
            (k, dists[k + 1], dists[k] - n_term, scale)
        });
        Ok(self.echo(CertificateReport::from_terms(NAME, terms)))
    }

    /// `‖w^{k+1} − w^{k+2}‖²_H ≤ ‖w^k − w^{k+1}‖²_H`
    pub fn nonergodic_monotonicity_check(&self, traj: &Trajectory<T>) -> Result<CertificateReport> {
        const NAME: &str = "nonergodic_monotonicity";
        check_trajectory(traj)?;
        if let Some(r) = self.gated(NAME) {
            return Ok(r);
        }
        let steps = self.step_norms(traj);
        let terms = steps
            .windows(2)
            .enumerate()
            .map(|(k, s)| (k, s[1], s[0], s[0].abs().max(s[1].abs())));
        Ok(self.echo(CertificateReport::from_terms(NAME, terms)))
    }

    /// `‖w^k − w^{k+1}‖²_H` for every recorded step.
    pub fn step_norms(&self, traj: &Trajectory<T>) -> Vec<T> {
        traj.iterates.windows(2).map(|w| self.h_dist(&w[0], &w[1])).collect()
    }

    /// `t‖w^t − w^{t+1}‖²_H ≤ (1/σ_γ)‖w⁰ − w*‖²_H + ‖x_m⁰ − x_m¹‖²_{P_m}` for `t ≥ 1`.
    pub fn nonergodic_rate_check(&self, traj: &Trajectory<T>, reference: &PrimalDualPoint<T>) -> Result<CertificateReport> {
        const NAME: &str = "nonergodic_rate";
        check_trajectory(traj)?;
        if let Some(r) = self.gated(NAME) {
            return Ok(r);
        }
        let sigma = sigma_gamma(self.gamma)?;
        let m = self.problem.num_blocks() - 1;
        let w0 = &traj.iterates[0];
        let w1 = &traj.iterates[1];
        let dxm = PrimalDualPoint::new(
            w0.primal
                .iter()
                .enumerate()
                .map(|(i, x)| if i == m { crate::linalg::sub(x, &w1.primal[m]) } else { vec![T::zero(); x.len()] })
                .collect(),
            vec![T::zero(); w0.dual.len()],
        );
        let bound = self.h_dist(w0, reference) / sigma + self.ops.weighted_norm_sq(Weight::Pm, &dxm);
        let steps = self.step_norms(traj);
        let terms = steps.iter().enumerate().skip(1).map(|(t, &s)| {
            let lhs = T::from_usize(t).unwrap() * s;
            (t, lhs, bound, bound.max(lhs.abs()))
        });
        Ok(self.echo(CertificateReport::from_terms(NAME, terms)))
    }

    /// `(x_m^k − x_m^{k+1})ᵀA_mᵀ(y^k − y^{k+1}) ≥ ½‖x_m^k − x_m^{k+1}‖²_{P_m} − ½‖x_m^{k−1} − x_m^k‖²_{P_m}`
    /// for `k ≥ 1`.
    pub fn cross_term_check(&self, traj: &Trajectory<T>) -> Result<CertificateReport> {
        const NAME: &str = "cross_term";
        check_trajectory(traj)?;
        if let Some(r) = self.gated(NAME) {
            return Ok(r);
        }
        let m = self.problem.num_blocks() - 1;
        let am = self.problem.block(m).map.as_ref();
        let pm = |a: &[T], b: &[T]| -> T {
            let d = crate::linalg::sub(a, b);
            self.ops_metric_pm(&d)
        };
        let it = &traj.iterates;
        let terms = (1..traj.len()).map(|k| {
            let dx = crate::linalg::sub(&it[k].primal[m], &it[k + 1].primal[m]);
            let dy = crate::linalg::sub(&it[k].dual, &it[k + 1].dual);
            let lhs = crate::linalg::dot(&am.apply(&dx), &dy);
            let cur = pm(&it[k].primal[m], &it[k + 1].primal[m]);
            let prev = pm(&it[k - 1].primal[m], &it[k].primal[m]);
            let rhs = T::half() * (cur - prev);
            let scale = lhs.abs().max(cur.abs()).max(prev.abs());
            // lhs ≥ rhs, written as −lhs ≤ −rhs.
            (k, -lhs, -rhs, scale)
        });
        Ok(self.echo(CertificateReport::from_terms(NAME, terms)))
    }

    fn ops_metric_pm(&self, d: &[T]) -> T {
        let m = self.problem.num_blocks() - 1;
        let mut primal: Vec<Vec<T>> = self.problem.block_dims().iter().map(|&n| vec![T::zero(); n]).collect();
        primal[m] = d.to_vec();
        let v = PrimalDualPoint::new(primal, vec![T::zero(); self.problem.constraint_dim()]);
        self.ops.weighted_norm_sq(Weight::Pm, &v)
    }

    /// `(lhs, rhs)` of the ergodic bound for each probe:
    /// `ϑ(u_t) − ϑ(u) + (w_t − w)ᵀF(w)` and `‖w − w⁰‖²_H / (2(t+1))`.
    pub fn ergodic_gap_terms(
        &self,
        average: &PrimalDualPoint<T>,
        probes: &[PrimalDualPoint<T>],
        w0: &PrimalDualPoint<T>,
        t: usize,
    ) -> Result<Vec<(T, T)>> {
        let theta_t = evaluate_objective(self.problem, average)?;
        let denom = T::two() * T::from_usize(t + 1).unwrap();
        probes
            .iter()
            .map(|w| {
                self.check_probe(w)?;
                let f = vi_operator(self.problem, w)?.as_point();
                let lhs = theta_t - evaluate_objective(self.problem, w)? + average.sub(w).inner(&f);
                let rhs = self.h_dist(w, w0) / denom;
                Ok((lhs, rhs))
            })
            .collect()
    }

    /// `ϑ(u_t) − ϑ(u) + (w_t − w)ᵀF(w) ≤ ‖w − w⁰‖²_H / (2(t+1))` for each probe `w ∈ W`.
    pub fn ergodic_gap_check(
        &self,
        average: &PrimalDualPoint<T>,
        probes: &[PrimalDualPoint<T>],
        w0: &PrimalDualPoint<T>,
        t: usize,
    ) -> Result<CertificateReport> {
        const NAME: &str = "ergodic_gap";
        if let Some(r) = self.gated(NAME) {
            return Ok(r);
        }
        let terms = self.ergodic_gap_terms(average, probes, w0, t)?;
        Ok(self.echo(CertificateReport::from_terms(
            NAME,
            terms
                .into_iter()
                .enumerate()
                .map(|(i, (l, r))| (i, l, r, l.abs().max(r.abs()))),
        )))
    }

    /// `ϑ(u) − ϑ(ū^k) + (w − w̄^k)ᵀF(w̄^k) − (w − w̄^k)ᵀQ(w^k − w̄^k)`,
    /// nonnegative for every `w ∈ W` up to rounding.
    pub fn step_inequality_probe(
        &self,
        wk: &PrimalDualPoint<T>,
        wbar: &PrimalDualPoint<T>,
        probe: &PrimalDualPoint<T>,
    ) -> Result<T> {
        self.check_probe(probe)?;
        let f = vi_operator(self.problem, wbar)?.as_point();
        let d = probe.sub(wbar);
        let q = self.ops.apply_q(&wk.sub(wbar));
        Ok(evaluate_objective(self.problem, probe)? - evaluate_objective(self.problem, wbar)? + d.inner(&f) - d.inner(&q))
    }

    /// Runs [`Self::step_inequality_probe`] for every recorded step against each probe.
    pub fn step_inequality_check(&self, traj: &Trajectory<T>, probes: &[PrimalDualPoint<T>]) -> Result<CertificateReport> {
        const NAME: &str = "step_inequality";
        check_trajectory(traj)?;
        let mut terms = Vec::new();
        for k in 0..traj.len() {
            for p in probes {
                let margin = self.step_inequality_probe(&traj.iterates[k], &traj.auxiliaries[k], p)?;
                let scale = evaluate_objective(self.problem, p)?.abs();
                terms.push((k, -margin, T::zero(), scale));
            }
        }
        Ok(self.echo(CertificateReport::from_terms(NAME, terms)))
    }

    fn check_probe(&self, w: &PrimalDualPoint<T>) -> Result<()> {
        self.problem.check_point(w)?;
        let dist = self.problem.distance_to_feasible_set(w);
        if dist > T::lit(1e-8) * (T::one() + w.norm()) {
            return Err(Error::InfeasibleProbe { distance: dist.as_f64() });
        }
        Ok(())
    }
}

fn check_trajectory<T: Real>(traj: &Trajectory<T>) -> Result<()> {
    if traj.iterates.len() != traj.auxiliaries.len() + 1 {
        return Err(Error::MissingTrajectory(format!(
            "{} iterates but {} auxiliary points",
            traj.iterates.len(),
            traj.auxiliaries.len()
        )));
    }
    if traj.is_empty() {
        return Err(Error::MissingTrajectory("no steps recorded".into()));
    }
    Ok(())
}

/// `w_t = (1/(t+1)) Σ_{k≤t} w̄^k`
pub fn ergodic_average<T: Real>(auxiliaries: &[PrimalDualPoint<T>]) -> Result<PrimalDualPoint<T>> {
    let first = auxiliaries
        .first()
        .ok_or_else(|| Error::MissingTrajectory("no auxiliary points to average".into()))?;
    let mut sum = first.clone();
    for w in &auxiliaries[1..] {
        sum = sum.add(w);
    }
    Ok(sum.scaled(T::one() / T::from_usize(auxiliaries.len()).unwrap()))
}

/// Gaussian points `center + scale·ξ`, projected onto the block sets.
pub fn feasible_probes<T: Real>(
    problem: &BlockProblem<T>,
    center: &PrimalDualPoint<T>,
    scale: T,
    count: usize,
    seed: u64,
) -> Vec<PrimalDualPoint<T>> {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut jitter = |c: &[T]| -> Vec<T> {
                c.iter()
                    .map(|&ci| {
                        let xi: f64 = StandardNormal.sample(&mut rng);
                        ci + scale * T::lit(xi)
                    })
                    .collect()
            };
            let primal = center.primal.iter().map(|x| jitter(x)).collect();
            let dual = jitter(&center.dual);
            problem.project(&PrimalDualPoint::new(primal, dual))
        })
        .collect()
}

/// High-accuracy solve standing in for `w*`: tolerance 1e-10, ten times the iteration cap.
pub fn reference_solution<T: Real>(
    problem: &BlockProblem<T>,
    config: &SolverConfig<T>,
    start: PrimalDualPoint<T>,
) -> Result<SolveResult<T>> {
    let mut cfg = config.clone();
    cfg.tolerance = T::lit(1e-10);
    cfg.max_iterations = config.max_iterations.saturating_mul(10);
    cfg.record_trajectory = false;
    cfg.track_h_norm = false;
    solve(problem, &cfg, start)
}

/// Every trajectory check at once; `probes` feed the ergodic and step checks.
pub fn run_all_checks<T: Real>(
    certifier: &Certifier<'_, T>,
    traj: &Trajectory<T>,
    reference: &PrimalDualPoint<T>,
    probes: &[PrimalDualPoint<T>],
) -> Result<Vec<CertificateReport>> {
    let t = traj.len() - 1;
    let average = ergodic_average(&traj.auxiliaries)?;
    Ok(vec![
        certifier.fejer_check(traj, reference)?,
        certifier.nonergodic_monotonicity_check(traj)?,
        certifier.cross_term_check(traj)?,
        certifier.nonergodic_rate_check(traj, reference)?,
        certifier.ergodic_gap_check(&average, probes, &traj.iterates[0], t)?,
    ])
}
