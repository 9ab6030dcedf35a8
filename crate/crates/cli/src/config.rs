//! Scenario files: JSON documents with row-major nested arrays for matrices.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use offtrack::learner::{ExcitationSpec, GradientOptions, LearnConfig, Solver, ThetaSource};
use offtrack::linalg::{self, Mat, Vector};
use offtrack::problem::{FilterChoice, Problem};
use offtrack::system::{Exosystem, Plant, Weights};

use crate::error::CliError;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExosystemConfig {
    pub s: Rows,
    pub r: Rows,
    /// Monic, descending powers.
    pub minimal_poly: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub q: Rows,
    pub r: Rows,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FilterConfig {
    #[default]
    Deadbeat,
    Radius { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExcitationConfig {
    pub n_sines: usize,
    pub amp: f64,
    pub freq_range: [f64; 2],
    pub noise_amp: f64,
}

impl Default for ExcitationConfig {
    fn default() -> Self {
        let d = ExcitationSpec::default();
        Self {
            n_sines: d.n_sines,
            amp: d.amp,
            freq_range: [d.freq_range.0, d.freq_range.1],
            noise_amp: d.noise_amp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThetaConfig {
    #[default]
    Exploration,
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SolverConfig {
    #[default]
    Direct,
    Gradient {
        #[serde(default = "default_eps_fraction")]
        eps_fraction: f64,
        #[serde(default = "default_max_s")]
        max_s: u64,
        #[serde(default = "default_grad_tol")]
        tol: f64,
    },
}

fn default_eps_fraction() -> f64 {
    GradientOptions::default().eps_fraction
}
fn default_max_s() -> u64 {
    GradientOptions::default().max_s
}
fn default_grad_tol() -> f64 {
    GradientOptions::default().tol
}

impl SolverConfig {
    pub fn gradient_default() -> Self {
        SolverConfig::Gradient {
            eps_fraction: default_eps_fraction(),
            max_s: default_max_s(),
            tol: default_grad_tol(),
        }
    }
}

/// How the behavior gain is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitConfig {
    /// Zero when the augmented open loop is Schur, otherwise oracle-assisted.
    #[default]
    Auto,
    Zero,
    Gain { gain: Rows },
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub k0_list: Vec<usize>,
    /// Samples per collection window; defaults to `kf - k0`.
    pub window: Option<usize>,
}

fn default_stop() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub plant: PlantConfig,
    pub exosystem: ExosystemConfig,
    pub weights: WeightsConfig,
    #[serde(default)]
    pub feedforward: Option<Rows>,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub excitation: ExcitationConfig,
    #[serde(default)]
    pub theta_source: ThetaConfig,
    pub x0: Vec<f64>,
    pub xd0: Vec<f64>,
    pub k0: usize,
    pub kf: usize,
    pub horizon: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default = "default_stop")]
    pub stop_tolerance: f64,
    #[serde(default = "default_max_iter")]
    pub max_policy_iterations: usize,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Gain used by `track` instead of learning one.
    #[serde(default)]
    pub deploy_gain: Option<Rows>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the normalized document, after any overrides.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn matrix(rows: &Rows, what: &str) -> Result<Mat, CliError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(CliError::Config(format!("{what} is empty")));
    }
    linalg::from_rows(rows).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

/// Validated objects built from a config.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub problem: Problem,
    pub x0: Vector,
    pub xd0: Vector,
    pub excitation: ExcitationSpec,
    pub theta_source: ThetaSource,
    pub learn: LearnConfig,
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self, CliError> {
        let c = &config;
        let plant = Plant::new(
            matrix(&c.plant.a, "plant.a")?,
            matrix(&c.plant.b, "plant.b")?,
            matrix(&c.plant.c, "plant.c")?,
        )
        .map_err(|e| CliError::Config(format!("plant: {e}")))?;
        let exo = Exosystem::new(
            matrix(&c.exosystem.s, "exosystem.s")?,
            matrix(&c.exosystem.r, "exosystem.r")?,
            c.exosystem.minimal_poly.clone(),
        )
        .map_err(|e| CliError::Config(format!("exosystem: {e}")))?;
        if plant.n_outputs() != exo.n_outputs() {
            return Err(CliError::Config(format!(
                "plant has {} outputs but the reference has {}",
                plant.n_outputs(),
                exo.n_outputs()
            )));
        }
        let weights = Weights::new(matrix(&c.weights.q, "weights.q")?, matrix(&c.weights.r, "weights.r")?)
            .map_err(|e| CliError::Config(format!("weights: {e}")))?;
        let t = c
            .feedforward
            .as_ref()
            .map(|rows| matrix(rows, "feedforward"))
            .transpose()?;
        let filter = match c.filter {
            FilterConfig::Deadbeat => FilterChoice::Deadbeat,
            FilterConfig::Radius { radius } => {
                if !(radius > 0.0 && radius < 1.0) {
                    return Err(CliError::Config(format!(
                        "filter.radius must lie in (0, 1), got {radius}"
                    )));
                }
                FilterChoice::Radius(radius)
            }
        };
        if c.x0.len() != plant.n_states() {
            return Err(CliError::Config(format!(
                "x0 has {} entries, plant has {} states",
                c.x0.len(),
                plant.n_states()
            )));
        }
        if c.xd0.len() != exo.n_states() {
            return Err(CliError::Config(format!(
                "xd0 has {} entries, exosystem has {} states",
                c.xd0.len(),
                exo.n_states()
            )));
        }
        if c.k0 >= c.kf {
            return Err(CliError::Config(format!("k0 = {} must be below kf = {}", c.k0, c.kf)));
        }
        if c.horizon == 0 {
            return Err(CliError::Config("horizon must be positive".into()));
        }
        if c.stop_tolerance.is_nan() || c.stop_tolerance <= 0.0 || c.max_policy_iterations == 0 {
            return Err(CliError::Config(
                "stop_tolerance and max_policy_iterations must be positive".into(),
            ));
        }
        let problem = Problem::new(plant, exo, weights, t, filter, c.seed).map_err(|e| match e {
            offtrack::Error::FeedforwardNotObservable { .. } => CliError::Core(e),
            other => CliError::Config(other.to_string()),
        })?;
        let excitation = ExcitationSpec {
            n_sines: c.excitation.n_sines,
            amp: c.excitation.amp,
            freq_range: (c.excitation.freq_range[0], c.excitation.freq_range[1]),
            noise_amp: c.excitation.noise_amp,
            seed: c.seed,
        };
        excitation
            .validate()
            .map_err(|e| CliError::Config(format!("excitation: {e}")))?;
        let solver = match c.solver {
            SolverConfig::Direct => Solver::Direct,
            SolverConfig::Gradient { eps_fraction, max_s, tol } => {
                if !(eps_fraction > 0.0 && tol > 0.0) {
                    return Err(CliError::Config("gradient eps_fraction and tol must be positive".into()));
                }
                Solver::Gradient(GradientOptions { eps_fraction, max_s, tol })
            }
        };
        let n_zeta = problem.n_zeta();
        let r_m = problem.plant.n_inputs();
        for (rows, what) in [(&c.deploy_gain, "deploy_gain"), (&gain_rows(&c.init), "init.gain")] {
            if let Some(rows) = rows {
                let g = matrix(rows, what)?;
                if g.shape() != (r_m, n_zeta) {
                    return Err(CliError::Config(format!(
                        "{what} must be {r_m}x{n_zeta}, got {}x{}",
                        g.nrows(),
                        g.ncols()
                    )));
                }
            }
        }
        let theta_source = match c.theta_source {
            ThetaConfig::Exploration => ThetaSource::Exploration,
            ThetaConfig::Reference => ThetaSource::Reference,
        };
        let learn = LearnConfig {
            solver,
            stop_tol: c.stop_tolerance,
            max_iterations: c.max_policy_iterations,
        };
        Ok(Self {
            x0: Vector::from_vec(c.x0.clone()),
            xd0: Vector::from_vec(c.xd0.clone()),
            config,
            problem,
            excitation,
            theta_source,
            learn,
        })
    }
}

fn gain_rows(init: &InitConfig) -> Option<Rows> {
    match init {
        InitConfig::Gain { gain } => Some(gain.clone()),
        _ => None,
    }
}

pub fn rows_of(m: &Mat) -> Rows {
    linalg::to_rows(m)
}
