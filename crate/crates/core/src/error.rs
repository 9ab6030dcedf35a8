use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not Schur: spectral radius {spectral_radius:.6e} >= 1")]
    NotSchur { spectral_radius: f64 },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("{what} is not positive definite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite {
        what: &'static str,
        min_eigenvalue: f64,
    },

    #[error("polynomial must be monic with degree >= 1, got leading coefficient {leading}")]
    NonMonicPolynomial { leading: f64 },

    #[error("filter polynomial has a root of modulus {modulus:.6} outside the open unit disk")]
    UnstableFilter { modulus: f64 },

    #[error("no observable (F, T) pair found after {attempts} draws (seed {seed})")]
    FeedforwardNotObservable { attempts: usize, seed: u64 },

    #[error("no stabilizing gain found by value iteration within {iterations} iterations")]
    NoStabilizingGain { iterations: usize },

    #[error("Stein solve failed at policy iteration {iteration}: {reason}")]
    SteinFailure { iteration: usize, reason: String },

    #[error("regulator equations have no common solution (residual {residual:.3e})")]
    RegulatorResidual { residual: f64 },

    #[error("observer placement failed after {attempts} attempts ({reason})")]
    PlacementFailed { attempts: usize, reason: String },

    #[error("not enough samples: have {have}, need at least {need}")]
    InsufficientSamples { have: usize, need: usize },

    #[error("rank condition not met: rank {rank} < required {required}")]
    RankCondition { rank: usize, required: usize },

    #[error("step size {step:.6e} violates the contraction bound {bound:.6e}")]
    StepSizeAboveBound { step: f64, bound: f64 },

    #[error("gradient iteration did not converge in {iterations} steps (last step norm {last_step:.3e})")]
    GradientNotConverged { iterations: u64, last_step: f64 },

    #[error("closed loop diverged at k = {k} (state norm {norm:.3e})")]
    Instability { k: usize, norm: f64 },

    #[error("policy iteration did not converge in {iterations} iterations (last gain change {last_delta:.3e})")]
    NonConvergence { iterations: usize, last_delta: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
