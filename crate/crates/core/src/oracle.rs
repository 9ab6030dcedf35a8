//! Model-based ground truth for the learner: Riccati solution by policy
//! iteration, the regulator equations and LQ cost evaluation.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::system::{AugmentedSystem, Exosystem, Weights};

pub const VALUE_ITERATION_LIMIT: usize = 10_000;
/// Value iteration returns the first gain whose closed loop has spectral
/// radius below `1 - STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-3;
pub const REGULATOR_TOL: f64 = 1e-8;
/// Relative gain step below which Hewer iterates are at round-off level.
pub const STAGNATION_LEVEL: f64 = 1e-9;
pub const MONOTONE_SLACK: f64 = 1e-9;

/// Standard LQ data `x+ = A x + B u`, cost `sum x'Q x + u'R u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqProblem {
    pub a: Mat,
    pub b: Mat,
    pub q: Mat,
    pub r: Mat,
}

impl LqProblem {
    pub fn new(a: Mat, b: Mat, q: Mat, r: Mat) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
            return Err(Error::Dimension("LQ problem blocks are inconsistent".into()));
        }
        Ok(Self { a, b, q, r })
    }

    /// Tracking LQ problem on the augmented state with weight `C' Q C`.
    pub fn from_augmented(aug: &AugmentedSystem, weights: &Weights) -> Result<Self> {
        Self::new(
            aug.under_a.clone(),
            aug.bar_b.clone(),
            aug.state_weight(weights),
            weights.r.clone(),
        )
    }

    pub fn closed_loop(&self, k: &Mat) -> Mat {
        &self.a - &self.b * k
    }

    /// Greedy gain `(R + B'PB)^-1 B'P A` induced by a value kernel.
    pub fn gain_from_kernel(&self, p: &Mat) -> Result<Mat> {
        let bt_p = self.b.transpose() * p;
        let h = &self.r + &bt_p * &self.b;
        let rhs = &bt_p * &self.a;
        let chol = linalg::symmetrize(&h)
            .cholesky()
            .ok_or(Error::NotPositiveDefinite {
                what: "R + B'PB",
                min_eigenvalue: linalg::min_sym_eigenvalue(&h).unwrap_or(f64::NAN),
            })?;
        Ok(chol.solve(&rhs))
    }

    /// Kernel `P_K` of the cost of gain `K`.
    pub fn policy_kernel(&self, k: &Mat) -> Result<Mat> {
        let qrhs = &self.q + k.transpose() * &self.r * k;
        linalg::solve_stein(&self.closed_loop(k), &qrhs)
    }
}

/// One step of policy iteration: `P` certifies `gain`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyIterate {
    pub j: usize,
    pub gain: Mat,
    pub kernel: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HewerRun {
    pub iterates: Vec<PolicyIterate>,
    pub gain: Mat,
    pub kernel: Mat,
    pub converged: bool,
}

/// Value iteration from `P = 0`, returning the first greedy gain with
/// spectral radius below `1 - STABILITY_MARGIN`.
pub fn initial_stabilizing_gain(lq: &LqProblem) -> Result<Mat> {
    let n = lq.a.nrows();
    let mut p = Mat::zeros(n, n);
    // Most stable Schur gain seen, for systems whose optimum sits closer to
    // the unit circle than the margin.
    let mut best: Option<(f64, Mat)> = None;
    for _ in 0..VALUE_ITERATION_LIMIT {
        let k = lq.gain_from_kernel(&p)?;
        let acl = lq.closed_loop(&k);
        let rho = linalg::spectral_radius(&acl)?;
        if rho < 1.0 - STABILITY_MARGIN {
            return Ok(k);
        }
        if rho < 1.0 && best.as_ref().is_none_or(|(r, _)| rho < *r) {
            best = Some((rho, k.clone()));
        }
        p = linalg::symmetrize(
            &(&lq.q + k.transpose() * &lq.r * &k + acl.transpose() * &p * &acl),
        );
        if p.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    best.map(|(_, k)| k).ok_or(Error::NoStabilizingGain {
        iterations: VALUE_ITERATION_LIMIT,
    })
}

/// Hewer's policy iteration from a stabilizing `k0`. Stops once
/// `|K^{j+1} - K^j| <= tol (1 + |K^{j+1}|)`, or when the step is already
/// below `STAGNATION_LEVEL` relative and no longer contracts, in which case
/// the last contracting iterate is final.
pub fn hewer_iterate(lq: &LqProblem, k0: &Mat, max_j: usize, tol: f64) -> Result<HewerRun> {
    if k0.shape() != (lq.b.ncols(), lq.a.nrows()) {
        return Err(Error::Dimension("initial gain shape".into()));
    }
    let mut iterates: Vec<PolicyIterate> = Vec::new();
    let mut k = k0.clone();
    let mut prev_delta = f64::INFINITY;
    for j in 0..max_j.max(1) {
        let p = lq.policy_kernel(&k).map_err(|e| Error::SteinFailure {
            iteration: j,
            reason: e.to_string(),
        })?;
        let k_next = lq.gain_from_kernel(&p)?;
        let delta = (&k_next - &k).norm();
        let scale = 1.0 + k_next.norm();
        if delta <= STAGNATION_LEVEL * scale && delta > 0.5 * prev_delta {
            // prev_delta is finite, so an iterate exists.
            let last = iterates.last().expect("at least one iterate");
            return Ok(HewerRun {
                gain: last.gain.clone(),
                kernel: last.kernel.clone(),
                iterates,
                converged: true,
            });
        }
        prev_delta = delta;
        iterates.push(PolicyIterate {
            j,
            gain: k.clone(),
            kernel: p,
        });
        k = k_next;
        if delta <= tol * scale {
            let kernel = lq.policy_kernel(&k).map_err(|e| Error::SteinFailure {
                iteration: j + 1,
                reason: e.to_string(),
            })?;
            iterates.push(PolicyIterate {
                j: j + 1,
                gain: k.clone(),
                kernel: kernel.clone(),
            });
            return Ok(HewerRun {
                iterates,
                gain: k,
                kernel,
                converged: true,
            });
        }
    }
    let last = iterates.last().expect("at least one iterate");
    Ok(HewerRun {
        gain: last.gain.clone(),
        kernel: last.kernel.clone(),
        iterates,
        converged: false,
    })
}

/// Frobenius norm of `Q + A'PA - A'PB (R + B'PB)^-1 B'PA - P`.
pub fn dare_residual(lq: &LqProblem, p: &Mat) -> Result<f64> {
    let k = lq.gain_from_kernel(p)?;
    let at_p = lq.a.transpose() * p;
    let res = &lq.q + &at_p * &lq.a - &at_p * &lq.b * k - p;
    Ok(res.norm())
}

/// Smallest eigenvalue of `P^j - P^{j+1}` over a run; should be `>= -slack`.
pub fn monotonicity_gap(run: &HewerRun) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for w in run.iterates.windows(2) {
        let d = &w[0].kernel - &w[1].kernel;
        worst = worst.min(linalg::min_sym_eigenvalue(&d)?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorSolution {
    pub x: Mat,
    /// `(|A X + G R - X S|, |C X - R|)`
    pub residuals: (f64, f64),
}

/// Joint least-squares solution of `A X + G R = X S` and `C X = R`.
pub fn solve_regulator_equations(
    a_closed: &Mat,
    bar_g: &Mat,
    bar_c: &Mat,
    exo: &Exosystem,
) -> Result<RegulatorSolution> {
    let n = a_closed.nrows();
    let q = exo.n_states();
    let s = &exo.s;
    let r = &exo.r;
    let p = r.nrows();
    if bar_g.shape() != (n, p) || bar_c.shape() != (p, n) {
        return Err(Error::Dimension("regulator equation blocks".into()));
    }
    let iq = Mat::identity(q, q);
    let top = linalg::kron(&iq, a_closed) - linalg::kron(&s.transpose(), &Mat::identity(n, n));
    let bottom = linalg::kron(&iq, bar_c);
    let mut lhs = Mat::zeros(n * q + p * q, n * q);
    lhs.view_mut((0, 0), top.shape()).copy_from(&top);
    lhs.view_mut((n * q, 0), bottom.shape()).copy_from(&bottom);
    let mut rhs = Vector::zeros(n * q + p * q);
    rhs.rows_mut(0, n * q)
        .copy_from(&(-linalg::vec(&(bar_g * r))));
    rhs.rows_mut(n * q, p * q).copy_from(&linalg::vec(r));
    let sol = linalg::solve_linear_least_squares(&lhs, &rhs)?;
    let x = Mat::from_column_slice(n, q, sol.as_slice());
    let r1 = (a_closed * &x + bar_g * r - &x * s).norm();
    let r2 = (bar_c * &x - r).norm();
    if r1.max(r2) > REGULATOR_TOL {
        return Err(Error::RegulatorResidual {
            residual: r1.max(r2),
        });
    }
    Ok(RegulatorSolution {
        x,
        residuals: (r1, r2),
    })
}

/// Truncated infinite-horizon cost of gain `k` from `e0`. Stops once the
/// error has decayed by 1e-8 relative to `e0`, or after `max_horizon` steps.
pub fn evaluate_cost(lq: &LqProblem, k: &Mat, e0: &Vector, max_horizon: usize) -> Result<f64> {
    let acl = lq.closed_loop(k);
    let rho = linalg::spectral_radius(&acl)?;
    if rho >= 1.0 {
        return Err(Error::NotSchur {
            spectral_radius: rho,
        });
    }
    let w = &lq.q + k.transpose() * &lq.r * k;
    let stop = 1e-8 * e0.norm();
    let mut e = e0.clone();
    let mut cost = 0.0;
    for _ in 0..max_horizon {
        if e.norm() <= stop {
            break;
        }
        cost += e.dot(&(&w * &e));
        e = &acl * e;
    }
    Ok(cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    fn scalar(a: f64) -> LqProblem {
        LqProblem::new(s(a), s(1.0), s(1.0), s(1.0)).unwrap()
    }

    // Positive root of P^2 - 0.25 P - 1 = 0.
    fn scalar_p_star() -> f64 {
        (0.25 + (0.0625f64 + 4.0).sqrt()) / 2.0
    }

    #[test]
    fn scalar_hewer_matches_closed_form() {
        let run = hewer_iterate(&scalar(0.5), &s(0.0), 100, 1e-12).unwrap();
        assert!(run.converged);
        let p = scalar_p_star();
        assert_relative_eq!(run.kernel[(0, 0)], p, epsilon = 1e-10);
        assert_relative_eq!(run.gain[(0, 0)], 0.5 * p / (1.0 + p), epsilon = 1e-10);
        assert!((p - 1.13278).abs() < 1e-5);
        assert!((run.gain[(0, 0)] - 0.26557).abs() < 1e-5);
        assert!(monotonicity_gap(&run).unwrap() >= -MONOTONE_SLACK);
    }

    #[test]
    fn zero_state_weight_gives_zero_solution() {
        let lq = LqProblem::new(s(0.5), s(1.0), s(0.0), s(1.0)).unwrap();
        let run = hewer_iterate(&lq, &s(0.0), 10, 1e-12).unwrap();
        assert_eq!(run.kernel[(0, 0)], 0.0);
        assert_eq!(run.gain[(0, 0)], 0.0);
    }

    #[test]
    fn value_iteration_examples() {
        assert_eq!(initial_stabilizing_gain(&scalar(0.5)).unwrap(), s(0.0));

        // P: 0 -> 1 -> 3 gives gains 0, 1, 1.5; the last is the first stabilizing one.
        let k = initial_stabilizing_gain(&scalar(2.0)).unwrap();
        assert_relative_eq!(k[(0, 0)], 1.5, epsilon = 1e-14);
        assert!((2.0 - k[(0, 0)]).abs() < 1.0);

        let lq = LqProblem::new(s(2.0), s(0.0), s(1.0), s(1.0)).unwrap();
        assert!(matches!(
            initial_stabilizing_gain(&lq),
            Err(Error::NoStabilizingGain { .. })
        ));
    }

    #[test]
    fn non_stabilizing_start_reports_iteration() {
        let err = hewer_iterate(&scalar(2.0), &s(0.0), 10, 1e-10).unwrap_err();
        assert!(matches!(err, Error::SteinFailure { iteration: 0, .. }));
    }

    fn random_lq(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LqProblem {
        let a = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = Mat::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
        let c = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q = c.transpose() * c + Mat::identity(n, n) * 0.1;
        LqProblem::new(a, b, q, Mat::identity(m, m)).unwrap()
    }

    #[test]
    fn random_four_state_dare_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let lq = random_lq(&mut rng, 4, 2);
            let k0 = initial_stabilizing_gain(&lq).unwrap();
            let run = hewer_iterate(&lq, &k0, 200, 1e-12).unwrap();
            assert!(run.converged);
            let res = dare_residual(&lq, &run.kernel).unwrap();
            assert!(res <= 1e-8 * (1.0 + run.kernel.norm()), "residual {res}");
            assert!(monotonicity_gap(&run).unwrap() >= -MONOTONE_SLACK * (1.0 + run.iterates[0].kernel.norm()));
            for it in &run.iterates {
                assert!(linalg::spectral_radius(&lq.closed_loop(&it.gain)).unwrap() < 1.0);
            }
        }
    }

    #[test]
    fn regulator_scalar_example() {
        let exo = Exosystem::new(s(1.0), s(1.0), vec![1.0, -1.0]).unwrap();
        let sol = solve_regulator_equations(&s(0.5), &s(0.5), &s(1.0), &exo).unwrap();
        assert_relative_eq!(sol.x[(0, 0)], 1.0, epsilon = 1e-12);

        let exo0 = Exosystem::new(s(1.0), s(0.0), vec![1.0, -1.0]).unwrap();
        let sol = solve_regulator_equations(&s(0.5), &s(0.5), &s(1.0), &exo0).unwrap();
        assert!(sol.x.norm() < 1e-14);

        // Inconsistent: C X = R forces X = 1 but the first equation forces X = 2.
        let err = solve_regulator_equations(&s(0.5), &s(1.0), &s(1.0), &exo).unwrap_err();
        assert!(matches!(err, Error::RegulatorResidual { .. }));
    }

    #[test]
    fn cost_examples() {
        let lq = scalar(0.5);
        let run = hewer_iterate(&lq, &s(0.0), 100, 1e-13).unwrap();
        assert_eq!(evaluate_cost(&lq, &run.gain, &Vector::zeros(1), 1000).unwrap(), 0.0);
        let e0 = Vector::from_element(1, 1.7);
        let c = evaluate_cost(&lq, &run.gain, &e0, 10_000).unwrap();
        assert_relative_eq!(c, 1.7 * 1.7 * scalar_p_star(), max_relative = 1e-9);
        assert!(evaluate_cost(&scalar(2.0), &s(0.0), &e0, 10).is_err());
    }

    #[test]
    fn cost_matches_stein_and_optimal_is_smallest() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let lq = random_lq(&mut rng, 3, 1);
        let k0 = initial_stabilizing_gain(&lq).unwrap();
        let run = hewer_iterate(&lq, &k0, 200, 1e-13).unwrap();
        let e0 = Vector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
        let best = evaluate_cost(&lq, &run.gain, &e0, 100_000).unwrap();
        let quad = e0.dot(&(&run.kernel * &e0));
        assert!((best - quad).abs() <= 1e-6 * (1.0 + quad));
        let mut tried = 0;
        while tried < 20 {
            let dk = Mat::from_fn(1, 3, |_, _| rng.gen_range(-0.2..0.2));
            let k = &run.gain + dk;
            if linalg::spectral_radius(&lq.closed_loop(&k)).unwrap() >= 0.999 {
                continue;
            }
            tried += 1;
            let c = evaluate_cost(&lq, &k, &e0, 100_000).unwrap();
            assert!(c >= best - 1e-9 * (1.0 + best));
            let pk = lq.policy_kernel(&k).unwrap();
            assert!((c - e0.dot(&(&pk * &e0))).abs() <= 1e-6 * (1.0 + c));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn hewer_is_monotone(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lq = random_lq(&mut rng, 3, 1);
            let k0 = initial_stabilizing_gain(&lq).unwrap();
            let run = hewer_iterate(&lq, &k0, 200, 1e-11).unwrap();
            prop_assert!(run.converged);
            let scale = 1.0 + run.iterates[0].kernel.norm();
            prop_assert!(monotonicity_gap(&run).unwrap() >= -MONOTONE_SLACK * scale);
            prop_assert!(dare_residual(&lq, &run.kernel).unwrap() <= 1e-8 * (1.0 + run.kernel.norm()));
        }
    }
}
