//! Model-free learner: behavior data collection, Bellman regressors, kernel
//! solvers and the policy-iteration loop.

pub mod algorithm;
pub mod behavior;
pub mod excitation;
pub mod regressor;
pub mod solve;
pub mod sweep;

pub use algorithm::{learn, learn_from_log, IterationRecord, LearnConfig, LearnOutcome, Solver};
pub use behavior::{
    deploy, run_behavior, tracking_metrics, BehaviorRun, DataLog, LoopState, Sample, Step,
    ThetaSource, TrackingMetrics,
};
pub use excitation::{Excitation, ExcitationSpec};
pub use regressor::{
    assemble_regressors, check_rank_condition, max_row_residual, KernelLayout, LearnedKernels,
    RankCheck, RegressorSystem,
};
pub use solve::{
    gradient_iterate, policy_update, solve_kernels_direct, solve_kernels_gradient, step_bound,
    GradientOptions, GradientResult,
};
pub use sweep::{sweep_k0, SweepPoint};
