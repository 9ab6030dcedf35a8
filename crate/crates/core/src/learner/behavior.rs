//! Closed-loop simulation used for data collection and deployment.
//!
//! At each step the controller sees only the filter vector `zeta(k)`. The
//! logged input `ubar` excludes the internal-model term: the plant receives
//! `u = ubar - T z`, and `z+ = F z - G y + G theta`. Under this convention
//! the pair `r = [x; z]` obeys `r+ = A r + B ubar + G theta` with the
//! augmented matrices.

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::reconstruction::{FilterBank, FilterSpec};
use crate::system::{
    AugmentedSystem, Exosystem, InternalModel, Plant, Trajectory, TrajectorySample,
    DIVERGENCE_NORM,
};

use super::excitation::{Excitation, ExcitationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThetaSource {
    /// Independent exploration signal.
    #[default]
    Exploration,
    /// The reference output `y_d`.
    Reference,
}

/// Plant, exosystem, internal model and filters stepped together.
#[derive(Debug, Clone)]
pub struct LoopState {
    pub plant: Plant,
    pub exo: Exosystem,
    pub model: InternalModel,
    pub t: Mat,
    pub x: Vector,
    pub xd: Vector,
    pub z: Vector,
    pub bank: FilterBank,
    pub k: usize,
}

/// Everything observed during one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub k: usize,
    pub zeta: Vector,
    pub zeta_next: Vector,
    pub ubar: Vector,
    pub theta: Vector,
    pub y: Vector,
    pub yd: Vector,
    pub u: Vector,
    /// `[x; z]` before the step, for diagnostics only.
    pub r: Vector,
}

impl LoopState {
    pub fn new(
        plant: &Plant,
        exo: &Exosystem,
        model: &InternalModel,
        aug: &AugmentedSystem,
        filter: &FilterSpec,
        x0: &Vector,
        xd0: &Vector,
    ) -> Result<Self> {
        if x0.len() != plant.n_states() || xd0.len() != exo.n_states() {
            return Err(Error::Dimension("initial state lengths".into()));
        }
        if filter.order() != aug.n_z {
            return Err(Error::Dimension(format!(
                "filter order {} must equal the augmented dimension {}",
                filter.order(),
                aug.n_z
            )));
        }
        Ok(Self {
            plant: plant.clone(),
            exo: exo.clone(),
            model: model.clone(),
            t: aug.t.clone(),
            x: x0.clone(),
            xd: xd0.clone(),
            z: Vector::zeros(model.dim()),
            bank: FilterBank::new(filter.clone(), plant.n_inputs(), plant.n_outputs()),
            k: 0,
        })
    }

    pub fn zeta(&self) -> Vector {
        self.bank.zeta_bar()
    }

    pub fn output(&self) -> Vector {
        &self.plant.c * &self.x
    }

    pub fn reference(&self) -> Vector {
        &self.exo.r * &self.xd
    }

    pub fn augmented_state(&self) -> Vector {
        let n = self.x.len();
        let mut r = Vector::zeros(n + self.z.len());
        r.rows_mut(0, n).copy_from(&self.x);
        r.rows_mut(n, self.z.len()).copy_from(&self.z);
        r
    }

    /// Advances one step with logged input `ubar` and internal-model drive `theta`.
    pub fn step(&mut self, ubar: &Vector, theta: &Vector) -> Result<Step> {
        let norm = self.x.norm().max(self.z.norm());
        if !norm.is_finite() || norm > DIVERGENCE_NORM || ubar.iter().any(|v| !v.is_finite()) {
            return Err(Error::Instability { k: self.k, norm });
        }
        let zeta = self.zeta();
        let r = self.augmented_state();
        let y = self.output();
        let yd = self.reference();
        let u = ubar - &self.t * &self.z;
        let x_next = &self.plant.a * &self.x + &self.plant.b * &u;
        let z_next = &self.model.f * &self.z + &self.model.g * (theta - &y);
        self.bank.step(ubar, &y, theta)?;
        self.x = x_next;
        self.z = z_next;
        self.xd = &self.exo.s * &self.xd;
        let step = Step {
            k: self.k,
            zeta,
            zeta_next: self.zeta(),
            ubar: ubar.clone(),
            theta: theta.clone(),
            y,
            yd,
            u,
            r,
        };
        self.k += 1;
        Ok(step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub k: usize,
    pub zeta: Vector,
    pub zeta_next: Vector,
    pub ubar: Vector,
    pub theta: Vector,
    pub y: Vector,
    /// Diagnostic ground truth `[x; z]`; the learner never reads it.
    pub r: Vector,
}

impl From<Step> for Sample {
    fn from(s: Step) -> Self {
        Self {
            k: s.k,
            zeta: s.zeta,
            zeta_next: s.zeta_next,
            ubar: s.ubar,
            theta: s.theta,
            y: s.y,
            r: s.r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataLog {
    pub samples: Vec<Sample>,
}

impl DataLog {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sub-log of samples with index in `range` (positions, not time stamps).
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            samples: self.samples[range].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorRun {
    pub k_o0: Mat,
    pub excitation: ExcitationSpec,
    pub theta_source: ThetaSource,
    pub k0: usize,
    pub kf: usize,
}

/// Runs the behavior policy `ubar = -K_o0 zeta + xi` from the current state
/// up to step `kf`, logging samples with `k >= k0`.
pub fn run_behavior(state: &mut LoopState, run: &BehaviorRun) -> Result<DataLog> {
    if run.k0 >= run.kf {
        return Err(Error::Dimension(format!(
            "collection window needs k0 < kf (k0 = {}, kf = {})",
            run.k0, run.kf
        )));
    }
    let r_m = state.plant.n_inputs();
    let r_p = state.plant.n_outputs();
    if run.k_o0.shape() != (r_m, state.bank.dim()) {
        return Err(Error::Dimension("behavior gain shape".into()));
    }
    let mut xi = Excitation::new(&run.excitation, r_m, 0)?;
    let mut th = Excitation::new(&run.excitation, r_p, 1)?;
    let mut log = DataLog::default();
    while state.k <= run.kf {
        let k = state.k;
        let ubar = -(&run.k_o0 * state.zeta()) + xi.sample(k);
        let theta = match run.theta_source {
            ThetaSource::Exploration => th.sample(k),
            ThetaSource::Reference => state.reference(),
        };
        let step = state.step(&ubar, &theta)?;
        if k >= run.k0 {
            log.samples.push(step.into());
        }
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingMetrics {
    /// `max |y_e|` at the first deployed step.
    pub initial_error: f64,
    pub trailing_max_error: f64,
    pub trailing_window: usize,
    /// First step index (relative to deployment start) after which
    /// `|y_e| <= 1e-3 * initial_error` holds for the rest of the run.
    pub settling_index: Option<usize>,
}

pub const TRAILING_WINDOW: usize = 50;

/// Applies `u = -K_o zeta - T z` with `theta = y_d`, continuing from the
/// current loop state without resetting filters or the internal model.
pub fn deploy(state: &mut LoopState, k_o: &Mat, horizon: usize) -> Result<Trajectory> {
    if k_o.shape() != (state.plant.n_inputs(), state.bank.dim()) {
        return Err(Error::Dimension("deployed gain shape".into()));
    }
    let mut traj = Trajectory::default();
    for _ in 0..horizon {
        let ubar = -(k_o * state.zeta());
        let theta = state.reference();
        let x = state.x.clone();
        let xd = state.xd.clone();
        let s = state.step(&ubar, &theta)?;
        traj.samples.push(TrajectorySample {
            k: s.k,
            x,
            ye: &s.y - &s.yd,
            y: s.y,
            xd,
            yd: s.yd,
            u: s.u,
        });
    }
    Ok(traj)
}

pub fn tracking_metrics(traj: &Trajectory) -> TrackingMetrics {
    let errs: Vec<f64> = traj.samples.iter().map(|s| s.ye.amax()).collect();
    let initial_error = errs.first().copied().unwrap_or(0.0);
    let window = TRAILING_WINDOW.min(errs.len());
    let trailing_max_error = errs[errs.len() - window..]
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let thresh = 1e-3 * initial_error;
    let settling_index = match errs.iter().rposition(|e| *e > thresh) {
        None => Some(0),
        Some(i) if i + 1 < errs.len() => Some(i + 1),
        Some(_) => None,
    };
    TrackingMetrics {
        initial_error,
        trailing_max_error,
        trailing_window: window,
        settling_index,
    }
}
