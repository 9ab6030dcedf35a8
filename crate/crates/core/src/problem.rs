//! A tracking problem with every derived object built once.

use crate::error::{Error, Result};
use crate::learner::LoopState;
use crate::linalg::{self, Mat, Vector};
use crate::oracle::{self, HewerRun, LqProblem};
use crate::reconstruction::{self, DataSystem, FilterSpec, Parameterization};
use crate::system::{
    self, AssumptionReport, AugmentedSystem, Exosystem, InternalModel, Plant, Weights,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterChoice {
    Deadbeat,
    /// All filter roots at this radius.
    Radius(f64),
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub plant: Plant,
    pub exo: Exosystem,
    pub weights: Weights,
    pub assumptions: AssumptionReport,
    pub model: InternalModel,
    pub aug: AugmentedSystem,
    pub filter: FilterSpec,
    pub seed: u64,
}

impl Problem {
    /// Builds the internal model and augmentation. `t` is drawn from `seed`
    /// when not supplied.
    pub fn new(
        plant: Plant,
        exo: Exosystem,
        weights: Weights,
        t: Option<Mat>,
        filter: FilterChoice,
        seed: u64,
    ) -> Result<Self> {
        if weights.q.nrows() != plant.n_outputs() || weights.r.nrows() != plant.n_inputs() {
            return Err(Error::Dimension(format!(
                "weights are {}x{} and {}x{}, plant has {} outputs and {} inputs",
                weights.q.nrows(),
                weights.q.ncols(),
                weights.r.nrows(),
                weights.r.ncols(),
                plant.n_outputs(),
                plant.n_inputs()
            )));
        }
        let assumptions = system::check_assumptions(&plant, &exo)?;
        let model = system::build_internal_model(&exo, plant.n_outputs())?;
        let t = match t {
            Some(t) => t,
            None => system::choose_feedforward(&model, plant.n_inputs(), seed)?,
        };
        let aug = system::build_augmented(&plant, &model, &t)?;
        let filter = match filter {
            FilterChoice::Deadbeat => FilterSpec::deadbeat(aug.n_z)?,
            FilterChoice::Radius(r) => FilterSpec::with_radius(aug.n_z, r)?,
        };
        Ok(Self {
            plant,
            exo,
            weights,
            assumptions,
            model,
            aug,
            filter,
            seed,
        })
    }

    pub fn n_zeta(&self) -> usize {
        self.aug.n_z * (self.plant.n_inputs() + 2 * self.plant.n_outputs())
    }

    pub fn lq(&self) -> Result<LqProblem> {
        LqProblem::from_augmented(&self.aug, &self.weights)
    }

    pub fn data_system(&self) -> DataSystem {
        DataSystem::from(&self.aug)
    }

    /// Model-based `M` for an observer gain drawn from the problem seed.
    pub fn parameterization(&self) -> Result<Parameterization> {
        let sys = self.data_system();
        let l = reconstruction::observer_gain(&sys, &self.filter, self.seed)?;
        reconstruction::parameterization_matrix(&sys, &self.filter, &l)
    }

    /// Policy iteration from the value-iteration gain.
    pub fn oracle(&self, max_j: usize, tol: f64) -> Result<HewerRun> {
        let lq = self.lq()?;
        let k0 = oracle::initial_stabilizing_gain(&lq)?;
        oracle::hewer_iterate(&lq, &k0, max_j, tol)
    }

    pub fn loop_state(&self, x0: &Vector, xd0: &Vector) -> Result<LoopState> {
        LoopState::new(
            &self.plant,
            &self.exo,
            &self.model,
            &self.aug,
            &self.filter,
            x0,
            xd0,
        )
    }

    /// Whether the augmented open loop is already Schur, so the zero gain can
    /// drive data collection.
    pub fn open_loop_schur(&self) -> Result<bool> {
        Ok(linalg::spectral_radius(&self.aug.under_a)? < 1.0 - oracle::STABILITY_MARGIN)
    }
}
