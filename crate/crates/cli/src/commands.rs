//! Subcommand implementations. Each run writes `report.json` plus the CSV
//! artifacts of its command into the output directory.

use std::fs;
use std::path::Path;
use std::time::Instant;

use offtrack::learner::{
    self, tracking_metrics, BehaviorRun, LearnOutcome, LearnedKernels, LoopState, Solver,
};
use offtrack::linalg::{self, Mat};
use offtrack::oracle::{self, HewerRun, LqProblem};
use offtrack::reconstruction::Parameterization;
use offtrack::system::Trajectory;

use crate::config::{rows_of, InitConfig, Scenario, ScenarioConfig};
use crate::error::{exit, CliError};
use crate::report::{
    num, write_csv, AssumptionSection, LearningSection, OracleSection, RunReport, SweepRow,
    TrackingSection,
};

const HEWER_MAX_ITERATIONS: usize = 1000;
const HEWER_TOL: f64 = 1e-12;
pub const DEFAULT_K0_LIST: [usize; 4] = [10, 20, 40, 80];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Check,
    Oracle,
    Learn,
    Track,
    SweepK0 { k0_list: Option<Vec<usize>> },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Oracle => "oracle",
            Command::Learn => "learn",
            Command::Track => "track",
            Command::SweepK0 { .. } => "sweep-k0",
        }
    }
}

struct Timer<'a> {
    report: &'a mut RunReport,
}

impl Timer<'_> {
    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.report
            .timings
            .insert(phase.to_string(), t.elapsed().as_secs_f64());
        out
    }
}

/// Runs a command on a parsed config and writes the artifacts. The returned
/// report carries the exit code.
pub fn run(command: &Command, config: ScenarioConfig, out: &Path) -> RunReport {
    let mut report = RunReport {
        command: command.name().to_string(),
        scenario: config.name.clone(),
        seed: config.seed,
        config_hash: config.hash(),
        ..Default::default()
    };
    let result = fs::create_dir_all(out)
        .map_err(CliError::from)
        .and_then(|_| Scenario::build(config))
        .and_then(|sc| dispatch(command, &sc, out, &mut report));
    match result {
        Ok(()) => {
            report.status = "ok".into();
            report.exit_code = exit::OK;
        }
        Err(e) => {
            report.status = e.kind().into();
            report.exit_code = e.exit_code();
            report.error = Some(e.to_string());
        }
    }
    if out.is_dir() {
        if let Err(e) = report.write(out) {
            report.exit_code = e.exit_code();
            report.error = Some(e.to_string());
        }
    }
    report
}

fn dispatch(command: &Command, sc: &Scenario, out: &Path, report: &mut RunReport) -> Result<(), CliError> {
    report.assumptions = assumption_section(sc);
    let required = report.assumptions.all_required_pass;
    if !required {
        return Err(CliError::Assumption(report.assumptions.diagnostics.clone()));
    }
    match command {
        Command::Check => Ok(()),
        Command::Oracle => {
            let (sec, _) = Timer { report }.time("oracle", || oracle_section(sc))?;
            report.oracle = Some(sec);
            Ok(())
        }
        Command::Learn => {
            let (sec, oracle) = Timer { report }.time("oracle", || oracle_section(sc))?;
            report.oracle = Some(sec);
            let mut state = sc.problem.loop_state(&sc.x0, &sc.xd0)?;
            let learned = Timer { report }.time("learn", || learn_phase(sc, &oracle, &mut state, out))?;
            report.learning = Some(learned.section);
            Ok(())
        }
        Command::Track => {
            let (sec, oracle) = Timer { report }.time("oracle", || oracle_section(sc))?;
            report.oracle = Some(sec);
            let mut state = sc.problem.loop_state(&sc.x0, &sc.xd0)?;
            let (gain, source) = match &sc.config.deploy_gain {
                Some(rows) => (linalg::from_rows(rows)?, "config".to_string()),
                None => {
                    let learned =
                        Timer { report }.time("learn", || learn_phase(sc, &oracle, &mut state, out))?;
                    let k = learned.outcome.k_o_star.clone();
                    report.learning = Some(learned.section);
                    (k, "learned".to_string())
                }
            };
            let traj = Timer { report }
                .time("deploy", || learner::deploy(&mut state, &gain, sc.config.horizon))?;
            write_trajectory(&out.join("trajectory.csv"), &traj)?;
            let m = tracking_metrics(&traj);
            report.tracking = Some(TrackingSection {
                gain_source: source,
                steps: traj.samples.len(),
                initial_error: m.initial_error,
                trailing_window: m.trailing_window,
                trailing_max_error: m.trailing_max_error,
                ratio_to_initial: if m.initial_error > 0.0 {
                    m.trailing_max_error / m.initial_error
                } else {
                    0.0
                },
                settling_index: m.settling_index,
            });
            Ok(())
        }
        Command::SweepK0 { k0_list } => {
            let (sec, oracle) = Timer { report }.time("oracle", || oracle_section(sc))?;
            report.oracle = Some(sec);
            let list = k0_list
                .clone()
                .or_else(|| (!sc.config.sweep.k0_list.is_empty()).then(|| sc.config.sweep.k0_list.clone()))
                .unwrap_or_else(|| DEFAULT_K0_LIST.to_vec());
            if list.is_empty() {
                return Err(CliError::Config("empty k0 list".into()));
            }
            let window = sc.config.sweep.window.unwrap_or(sc.config.kf - sc.config.k0);
            let (k_o0, _, _) = behavior_gain(sc, &oracle)?;
            let pts = Timer { report }.time("sweep", || {
                learner::sweep_k0(
                    &sc.problem,
                    &k_o0,
                    &sc.excitation,
                    sc.theta_source,
                    &sc.x0,
                    &sc.xd0,
                    &list,
                    window,
                )
            })?;
            let rows: Vec<Vec<String>> = pts
                .iter()
                .map(|p| vec![p.k0.to_string(), num(p.error)])
                .collect();
            write_csv(
                &out.join("sweep.csv"),
                &["k0".into(), "kernel_solution_error".into()],
                &rows,
            )?;
            report.sweep = Some(
                pts.iter()
                    .map(|p| SweepRow {
                        k0: p.k0,
                        kernel_solution_error: p.error,
                    })
                    .collect(),
            );
            Ok(())
        }
    }
}

fn assumption_section(sc: &Scenario) -> AssumptionSection {
    let a = &sc.problem.assumptions;
    let s = &sc.problem.aug.structure;
    let mut diagnostics = a.diagnostics.clone();
    diagnostics.extend(s.diagnostics.iter().map(|d| format!("augmented pair: {d}")));
    AssumptionSection {
        plant_controllable_observable: a.plant_minimal,
        reference_not_decaying: a.reference_persistent,
        minimal_polynomial_annihilates: a.polynomial_annihilates,
        no_blocking_zero: a.no_blocking_zero,
        augmented_stabilizable: s.stabilizable,
        augmented_detectable: s.detectable,
        augmented_controllable: s.controllable,
        augmented_observable: s.observable,
        all_required_pass: a.all_pass() && s.stabilizable && s.detectable,
        diagnostics,
    }
}

/// Model-based quantities kept for comparisons.
pub struct OracleData {
    pub lq: LqProblem,
    pub run: HewerRun,
    pub par: Parameterization,
    pub k_star_m: Mat,
}

fn oracle_section(sc: &Scenario) -> Result<(OracleSection, OracleData), CliError> {
    let pb = &sc.problem;
    let lq = pb.lq()?;
    let run = pb.oracle(HEWER_MAX_ITERATIONS, HEWER_TOL)?;
    if !run.converged {
        return Err(CliError::Core(offtrack::Error::NonConvergence {
            iterations: HEWER_MAX_ITERATIONS,
            last_delta: f64::NAN,
        }));
    }
    let plant_lq = LqProblem::new(
        pb.plant.a.clone(),
        pb.plant.b.clone(),
        pb.plant.c.transpose() * &pb.weights.q * &pb.plant.c,
        pb.weights.r.clone(),
    )?;
    let plant_k0 = oracle::initial_stabilizing_gain(&plant_lq)?;
    let plant_run = oracle::hewer_iterate(&plant_lq, &plant_k0, HEWER_MAX_ITERATIONS, HEWER_TOL)?;
    let a_cl = lq.closed_loop(&run.gain);
    let reg = oracle::solve_regulator_equations(&a_cl, &pb.aug.bar_g, &pb.aug.bar_c, &pb.exo)?;
    let par = pb.parameterization()?;
    let k_star_m = &run.gain * &par.m_bar;
    let sec = OracleSection {
        plant_p_star: rows_of(&plant_run.kernel),
        p_star: rows_of(&run.kernel),
        k_star: rows_of(&run.gain),
        k_star_m: rows_of(&k_star_m),
        dare_residual: oracle::dare_residual(&lq, &run.kernel)?,
        hewer_iterations: run.iterates.len(),
        monotonicity_gap: oracle::monotonicity_gap(&run)?,
        regulator_residuals: [reg.residuals.0, reg.residuals.1],
        closed_loop_spectral_radius: linalg::spectral_radius(&a_cl)?,
    };
    Ok((sec, OracleData { lq, run, par, k_star_m }))
}

fn behavior_gain(sc: &Scenario, oracle: &OracleData) -> Result<(Mat, String, bool), CliError> {
    let r_m = sc.problem.plant.n_inputs();
    let n_zeta = sc.problem.n_zeta();
    let oracle_gain = || &oracle.run.iterates[0].gain * &oracle.par.m_bar;
    Ok(match &sc.config.init {
        InitConfig::Auto if sc.problem.open_loop_schur()? => (Mat::zeros(r_m, n_zeta), "zero".into(), false),
        InitConfig::Auto | InitConfig::Oracle => (oracle_gain(), "oracle".into(), true),
        InitConfig::Zero => (Mat::zeros(r_m, n_zeta), "zero".into(), false),
        InitConfig::Gain { gain } => (linalg::from_rows(gain)?, "gain".into(), false),
    })
}

struct Learned {
    outcome: LearnOutcome,
    section: LearningSection,
}

fn rel_err(a: &Mat, b: &Mat) -> f64 {
    let d = (a - b).norm();
    let s = b.norm();
    if s > 0.0 {
        d / s
    } else {
        d
    }
}

fn learn_phase(sc: &Scenario, oracle: &OracleData, state: &mut LoopState, out: &Path) -> Result<Learned, CliError> {
    let (k_o0, mode, assisted) = behavior_gain(sc, oracle)?;
    let run = BehaviorRun {
        k_o0,
        excitation: sc.excitation.clone(),
        theta_source: sc.theta_source,
        k0: sc.config.k0,
        kf: sc.config.kf,
    };
    let outcome = learner::learn(state, &sc.problem.weights, &run, &sc.learn)?;

    // Oracle kernels for the exact policy each iteration evaluated.
    let sys = sc.problem.data_system();
    let m_pinv = oracle
        .par
        .m_bar
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| CliError::Io(e.to_string()))?;
    let mut rows = Vec::with_capacity(outcome.trace.len());
    for rec in &outcome.trace {
        let k_model = &rec.gain * &m_pinv;
        let (e1, e2) = match oracle.lq.policy_kernel(&k_model) {
            Ok(p) => {
                let truth = LearnedKernels::from_model(&sys, &oracle.par.m_bar, &p);
                (rel_err(&rec.kernels.l1, &truth.l1), rel_err(&rec.kernels.l2, &truth.l2))
            }
            Err(_) => (f64::NAN, f64::NAN),
        };
        rows.push(vec![
            rec.j.to_string(),
            num(rec.gain_delta),
            num(e1),
            num(e2),
            num(rel_err(&rec.next_gain, &oracle.k_star_m)),
        ]);
    }
    write_csv(
        &out.join("trace.csv"),
        &["j", "gain_delta", "kernel_err_L1", "kernel_err_L2", "gain_err_vs_oracle"].map(String::from),
        &rows,
    )?;
    let section = LearningSection {
        init_mode: mode,
        oracle_assisted_init: assisted,
        solver: match sc.learn.solver {
            Solver::Direct => "direct".into(),
            Solver::Gradient(_) => "gradient".into(),
        },
        rank: outcome.rank.rank,
        required_rank: outcome.rank.required,
        samples: outcome.log.len(),
        iterations: outcome.trace.len(),
        final_gain_delta: outcome.trace.last().map_or(0.0, |r| r.gain_delta),
        gain_err_vs_oracle: rel_err(&outcome.k_o_star, &oracle.k_star_m),
        k_o_star: rows_of(&outcome.k_o_star),
    };
    Ok(Learned { outcome, section })
}

fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let Some(first) = traj.samples.first() else {
        return write_csv(path, &["k".to_string()], &[]);
    };
    let p = first.y.len();
    let m = first.u.len();
    let mut header = vec!["k".to_string()];
    for (prefix, n) in [("y", p), ("y_d", p), ("y_e", p), ("u", m)] {
        header.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    let rows: Vec<Vec<String>> = traj
        .samples
        .iter()
        .map(|s| {
            let mut r = vec![s.k.to_string()];
            for v in [&s.y, &s.yd, &s.ye, &s.u] {
                r.extend(v.iter().map(|x| num(*x)));
            }
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}
