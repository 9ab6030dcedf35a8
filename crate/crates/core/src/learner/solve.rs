//! Kernel solvers for the regression `rho v = nu` and the gain update.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

use super::regressor::{check_rank_condition, LearnedKernels, RegressorSystem};

fn require_rank(reg: &RegressorSystem) -> Result<()> {
    let rc = check_rank_condition(reg);
    if !rc.ok {
        return Err(Error::RankCondition {
            rank: rc.rank,
            required: rc.required,
        });
    }
    Ok(())
}

/// Minimum-norm least-squares kernels. Refuses when the data are not rich enough.
pub fn solve_kernels_direct(reg: &RegressorSystem) -> Result<LearnedKernels> {
    require_rank(reg)?;
    let v = linalg::solve_linear_least_squares(&reg.rho, &reg.nu)?;
    LearnedKernels::unpack(&v, &reg.layout)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientOptions {
    /// Step as a fraction of the contraction bound `2 / lambda_max(rho' rho)`.
    pub eps_fraction: f64,
    pub max_s: u64,
    pub tol: f64,
}

impl Default for GradientOptions {
    fn default() -> Self {
        Self {
            eps_fraction: 0.5,
            max_s: 1 << 40,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientResult {
    pub v: Vector,
    /// Index `s` of the returned iterate.
    pub iterations: u64,
    pub step: f64,
    pub bound: f64,
    pub last_change: f64,
}

/// Contraction bound `2 / lambda_max(rho' rho)` for the step size.
pub fn step_bound(rho: &Mat) -> Result<f64> {
    let h = rho.transpose() * rho;
    Ok(2.0 / linalg::max_sym_eigenvalue(&h)?)
}

/// Iterates `v(s+1) = v(s) - eps rho'(rho v(s) - nu)` from `v(0) = 0` until
/// `|v(s+1) - v(s)| <= tol`.
///
/// The iteration is affine, `v(s+1) = M v(s) + c` with `M = I - eps rho'rho`,
/// so from `v(0) = 0` it satisfies `v(2s) = (I + M^s) v(s)` and
/// `v(s+1) - v(s) = M^s c`. The run first takes plain steps, then doubles `s`
/// with these identities; both paths visit the same iterates. Stopping is
/// checked at every visited index, so the returned `s` is within a factor two
/// of the first index meeting the tolerance.
pub fn gradient_iterate(rho: &Mat, nu: &Vector, eps: f64, max_s: u64, tol: f64) -> Result<GradientResult> {
    if rho.nrows() != nu.len() {
        return Err(Error::Dimension("gradient: rho and nu lengths".into()));
    }
    let bound = step_bound(rho)?;
    if !(eps > 0.0 && eps < bound) {
        return Err(Error::StepSizeAboveBound { step: eps, bound });
    }
    let n = rho.ncols();
    let h = rho.transpose() * rho;
    let c = rho.transpose() * nu * eps;
    let m = Mat::identity(n, n) - &h * eps;

    const PLAIN_STEPS: u64 = 64;
    let mut v = Vector::zeros(n);
    let mut s = 0u64;
    let mut last_change = f64::INFINITY;
    while s < PLAIN_STEPS.min(max_s) {
        let next = &m * &v + &c;
        last_change = (&next - &v).norm();
        v = next;
        s += 1;
        if last_change <= tol {
            return Ok(GradientResult { v, iterations: s, step: eps, bound, last_change });
        }
    }
    // Doubling phase: keep M^s alongside v(s).
    let mut ms = Mat::identity(n, n);
    let mut sq = m.clone();
    let mut e = s;
    while e > 0 {
        if e & 1 == 1 {
            ms = &ms * &sq;
        }
        sq = &sq * &sq;
        e >>= 1;
    }
    while s.saturating_mul(2) <= max_s {
        v = &v + &ms * &v;
        ms = &ms * &ms;
        s *= 2;
        last_change = (&ms * &c).norm();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("gradient iterate"));
        }
        if last_change <= tol {
            return Ok(GradientResult { v, iterations: s, step: eps, bound, last_change });
        }
    }
    Err(Error::GradientNotConverged {
        iterations: s,
        last_step: last_change,
    })
}

pub fn solve_kernels_gradient(reg: &RegressorSystem, opts: &GradientOptions) -> Result<(LearnedKernels, GradientResult)> {
    require_rank(reg)?;
    if !(opts.eps_fraction > 0.0 && opts.eps_fraction < 1.0) {
        let bound = step_bound(&reg.rho)?;
        return Err(Error::StepSizeAboveBound {
            step: opts.eps_fraction * bound,
            bound,
        });
    }
    let eps = opts.eps_fraction * step_bound(&reg.rho)?;
    let res = gradient_iterate(&reg.rho, &reg.nu, eps, opts.max_s, opts.tol)?;
    Ok((LearnedKernels::unpack(&res.v, &reg.layout)?, res))
}

/// `K_o = (R + L2)^-1 L1'`.
pub fn policy_update(kernels: &LearnedKernels, r: &Mat) -> Result<Mat> {
    if r.shape() != kernels.l2.shape() {
        return Err(Error::Dimension("input weight and L2 shapes".into()));
    }
    let h = linalg::symmetrize(&(r + &kernels.l2));
    let chol = h.clone().cholesky().ok_or(Error::NotPositiveDefinite {
        what: "R + L2",
        min_eigenvalue: linalg::min_sym_eigenvalue(&h).unwrap_or(f64::NAN),
    })?;
    Ok(chol.solve(&kernels.l1.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_regression_converges_to_nu() {
        let rho = Mat::identity(4, 4);
        let nu = Vector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        // eps = 0.5 * 2 / 1 = 1 solves in one step.
        let r = gradient_iterate(&rho, &nu, 0.5 * 2.0, 100, 1e-14).unwrap();
        assert!((&r.v - &nu).norm() < 1e-14);
        let r = gradient_iterate(&rho, &nu, 0.3, 10_000, 1e-14).unwrap();
        assert!((&r.v - &nu).norm() < 1e-13);
    }

    #[test]
    fn step_guard_rejects_above_bound() {
        let rho = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]));
        let nu = Vector::from_vec(vec![1.0, 1.0]);
        let bound = step_bound(&rho).unwrap();
        assert!((bound - 0.5).abs() < 1e-14);
        assert!(gradient_iterate(&rho, &nu, 0.99 * bound, 1 << 30, 1e-12).is_ok());
        assert!(matches!(
            gradient_iterate(&rho, &nu, 1.01 * bound, 1 << 30, 1e-12),
            Err(Error::StepSizeAboveBound { .. })
        ));
    }

    #[test]
    fn doubling_matches_plain_iteration() {
        let rho = Mat::from_row_slice(3, 2, &[1.0, 0.2, 0.0, 0.05, 0.3, 0.0]);
        let nu = Vector::from_vec(vec![1.0, 0.4, -0.2]);
        let eps = 0.5 * step_bound(&rho).unwrap();
        let r = gradient_iterate(&rho, &nu, eps, 1 << 20, 1e-13).unwrap();
        let h = rho.transpose() * &rho;
        let g = rho.transpose() * &nu;
        let mut v = Vector::zeros(2);
        for _ in 0..r.iterations {
            v = &v - (&h * &v - &g) * eps;
        }
        assert!((&v - &r.v).norm() < 1e-10 * (1.0 + v.norm()));
        let ls = linalg::solve_linear_least_squares(&rho, &nu).unwrap();
        assert!((&ls - &r.v).norm() < 1e-9);
    }

    #[test]
    fn not_converged_is_reported() {
        let rho = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 1e-4]));
        let nu = Vector::from_vec(vec![1.0, 1.0]);
        let eps = 0.5 * step_bound(&rho).unwrap();
        assert!(matches!(
            gradient_iterate(&rho, &nu, eps, 100, 1e-12),
            Err(Error::GradientNotConverged { .. })
        ));
    }

    #[test]
    fn zero_l1_gives_zero_gain() {
        let k = LearnedKernels {
            lp: Mat::zeros(3, 3),
            l1: Mat::zeros(3, 1),
            l2: Mat::from_element(1, 1, 2.0),
            l3: Mat::zeros(3, 1),
            l4: Mat::zeros(1, 1),
            l5: Mat::zeros(1, 1),
        };
        assert_eq!(policy_update(&k, &Mat::identity(1, 1)).unwrap(), Mat::zeros(1, 3));
        let bad = LearnedKernels {
            l2: Mat::from_element(1, 1, -3.0),
            ..k
        };
        assert!(matches!(
            policy_update(&bad, &Mat::identity(1, 1)),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
