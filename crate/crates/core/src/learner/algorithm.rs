//! Off-policy learning loop: collect once, then alternate kernel solves and
//! gain updates on the same data log.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::system::Weights;

use super::behavior::{run_behavior, BehaviorRun, DataLog, LoopState};
use super::regressor::{assemble_regressors, check_rank_condition, LearnedKernels, RankCheck};
use super::solve::{policy_update, solve_kernels_direct, solve_kernels_gradient, GradientOptions};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Solver {
    #[default]
    Direct,
    Gradient(GradientOptions),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnConfig {
    pub solver: Solver,
    pub stop_tol: f64,
    pub max_iterations: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            solver: Solver::Direct,
            stop_tol: 1e-6,
            max_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub j: usize,
    /// Gain the regressors were built for.
    pub gain: Mat,
    pub kernels: LearnedKernels,
    pub next_gain: Mat,
    /// `|K_o^{j+1} - K_o^j|_F`
    pub gain_delta: f64,
    /// Gradient iteration count, when that solver is used.
    pub solver_iterations: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnOutcome {
    pub k_o_star: Mat,
    pub trace: Vec<IterationRecord>,
    pub rank: RankCheck,
    pub log: DataLog,
}

/// Policy iteration on a fixed log starting from `k_o0`.
pub fn learn_from_log(
    log: &DataLog,
    weights: &Weights,
    k_o0: &Mat,
    cfg: &LearnConfig,
) -> Result<(Mat, Vec<IterationRecord>, RankCheck)> {
    let mut k = k_o0.clone();
    let mut trace = Vec::new();
    let mut rank = None;
    let mut last_delta = f64::INFINITY;
    for j in 0..cfg.max_iterations {
        let reg = assemble_regressors(log, &k, weights)?;
        let rc = *rank.get_or_insert_with(|| check_rank_condition(&reg));
        if !rc.ok {
            return Err(Error::RankCondition {
                rank: rc.rank,
                required: rc.required,
            });
        }
        let (kernels, solver_iterations) = match &cfg.solver {
            Solver::Direct => (solve_kernels_direct(&reg)?, None),
            Solver::Gradient(opts) => {
                let (kern, res) = solve_kernels_gradient(&reg, opts)?;
                (kern, Some(res.iterations))
            }
        };
        let next = policy_update(&kernels, &weights.r)?;
        last_delta = (&next - &k).norm();
        trace.push(IterationRecord {
            j,
            gain: k.clone(),
            kernels,
            next_gain: next.clone(),
            gain_delta: last_delta,
            solver_iterations,
        });
        k = next;
        if last_delta <= cfg.stop_tol {
            return Ok((k, trace, rc));
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iterations,
        last_delta,
    })
}

/// Runs the behavior policy over `[0, kf]`, logging from `k0`, then learns.
/// The loop state is left at `kf + 1`, ready for deployment.
pub fn learn(
    state: &mut LoopState,
    weights: &Weights,
    run: &BehaviorRun,
    cfg: &LearnConfig,
) -> Result<LearnOutcome> {
    let log = run_behavior(state, run)?;
    let (k_o_star, trace, rank) = learn_from_log(&log, weights, &run.k_o0, cfg)?;
    Ok(LearnOutcome {
        k_o_star,
        trace,
        rank,
        log,
    })
}
