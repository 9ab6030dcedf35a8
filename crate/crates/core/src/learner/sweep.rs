//! Effect of the pre-collection length `k0` on the learned kernels.
//!
//! For each `k0` the behavior policy is run twice with identical excitation:
//! once from the given initial state and once from `r(0) = 0`. Both logs span
//! `[k0, k0 + window]`; the error is the relative distance between the stacked
//! `L1 .. L5` solved from each log for the behavior gain.

use crate::error::Result;
use crate::linalg::{Mat, Vector};
use crate::problem::Problem;

use super::behavior::{run_behavior, BehaviorRun, ThetaSource};
use super::excitation::ExcitationSpec;
use super::regressor::assemble_regressors;
use super::solve::solve_kernels_direct;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub k0: usize,
    pub error: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn sweep_k0(
    problem: &Problem,
    k_o0: &Mat,
    excitation: &ExcitationSpec,
    theta_source: ThetaSource,
    x0: &Vector,
    xd0: &Vector,
    k0_list: &[usize],
    window: usize,
) -> Result<Vec<SweepPoint>> {
    let zero = Vector::zeros(x0.len());
    let mut out = Vec::with_capacity(k0_list.len());
    for &k0 in k0_list {
        let run = BehaviorRun {
            k_o0: k_o0.clone(),
            excitation: excitation.clone(),
            theta_source,
            k0,
            kf: k0 + window,
        };
        let solve = |x_init: &Vector| -> Result<Vector> {
            let mut state = problem.loop_state(x_init, xd0)?;
            let log = run_behavior(&mut state, &run)?;
            let reg = assemble_regressors(&log, k_o0, &problem.weights)?;
            solve_kernels_direct(&reg)?.cross_vector(&reg.layout)
        };
        let truth = solve(&zero)?;
        let est = solve(x0)?;
        out.push(SweepPoint {
            k0,
            error: (&est - &truth).norm() / truth.norm().max(f64::MIN_POSITIVE),
        });
    }
    Ok(out)
}
