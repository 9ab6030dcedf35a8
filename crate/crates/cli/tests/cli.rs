use std::fs;
use std::path::Path;
use std::process::Command as Proc;

use offtrack_cli::commands::{self, Command};
use offtrack_cli::config::{ScenarioConfig, SolverConfig};
use offtrack_cli::error::exit;
use offtrack_cli::scenarios;

const BIN: &str = env!("CARGO_BIN_EXE_offtrack");

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn missing_field_is_named() {
    let mut v: serde_json::Value = serde_json::from_str(scenarios::BUNDLED[0].1).unwrap();
    v.as_object_mut().unwrap().remove("horizon");
    let err = ScenarioConfig::from_json(&v.to_string()).unwrap_err();
    assert_eq!(err.exit_code(), exit::CONFIG);
    assert!(err.to_string().contains("horizon"), "{err}");
}

#[test]
fn unknown_field_is_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(scenarios::BUNDLED[0].1).unwrap();
    v["plant"]["d"] = serde_json::json!([[0.0]]);
    let err = ScenarioConfig::from_json(&v.to_string()).unwrap_err();
    assert!(err.to_string().contains('d'), "{err}");
}

#[test]
fn bad_shapes_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = scenarios::load("rot_tracking").unwrap();
    cfg.x0 = vec![1.0];
    let r = commands::run(&Command::Check, cfg, tmp.path());
    assert_eq!(r.exit_code, exit::CONFIG);
    assert!(r.error.unwrap().contains("x0"));
    // The report is still written.
    assert_eq!(report(tmp.path())["status"], "config");
}

#[test]
fn decaying_reference_fails_assumption_check() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = scenarios::load("scalar_step").unwrap();
    cfg.exosystem.s = vec![vec![0.5]];
    cfg.exosystem.minimal_poly = vec![1.0, -0.5];
    let r = commands::run(&Command::Learn, cfg, tmp.path());
    assert_eq!(r.exit_code, exit::ASSUMPTION);
    let rep = report(tmp.path());
    assert_eq!(rep["assumptions"]["reference_not_decaying"], false);
    assert_eq!(rep["assumptions"]["all_required_pass"], false);
    assert!(!tmp.path().join("trace.csv").exists());
}

#[test]
fn oracle_report_for_scalar_step() {
    let tmp = tempfile::tempdir().unwrap();
    let r = commands::run(&Command::Oracle, scenarios::load("scalar_step").unwrap(), tmp.path());
    assert_eq!(r.exit_code, exit::OK);
    let o = r.oracle.unwrap();
    assert!(o.dare_residual < 1e-10);
    assert!(o.monotonicity_gap >= -1e-9);
    assert!(o.regulator_residuals.iter().all(|x| *x < 1e-8));
    assert!(o.closed_loop_spectral_radius < 1.0);
    // Plant-only DARE with A = B = C = Q = R = 1/2, 1, 1, 1, 1.
    let p = o.plant_p_star[0][0];
    assert!((p * p - 0.25 * p - 1.0).abs() < 1e-9 * (1.0 + p));
}

#[test]
fn gradient_solver_learns_the_same_gain() {
    let tmp = tempfile::tempdir().unwrap();
    let direct = commands::run(&Command::Learn, scenarios::load("rot_tracking").unwrap(), &tmp.path().join("d"));
    let mut cfg = scenarios::load("rot_tracking").unwrap();
    cfg.solver = SolverConfig::gradient_default();
    let grad = commands::run(&Command::Learn, cfg, &tmp.path().join("g"));
    assert_eq!(grad.exit_code, exit::OK, "{:?}", grad.error);
    let (d, g) = (direct.learning.unwrap(), grad.learning.unwrap());
    assert_eq!(g.solver, "gradient");
    assert!(g.gain_err_vs_oracle < 1e-6 && d.gain_err_vs_oracle < 1e-6);
    let trace = fs::read_to_string(tmp.path().join("g/trace.csv")).unwrap();
    assert!(trace.starts_with("j,gain_delta,kernel_err_L1,kernel_err_L2,gain_err_vs_oracle"));
}

#[test]
fn too_few_samples_is_a_rank_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = scenarios::load("rot_tracking").unwrap();
    cfg.kf = cfg.k0 + 50;
    let r = commands::run(&Command::Learn, cfg, tmp.path());
    assert_eq!(r.exit_code, exit::RANK, "{:?}", r.error);
}

#[test]
fn binary_exit_codes_and_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("track");
    let st = Proc::new(BIN)
        .args(["track", "--scenario", "scalar_step", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(exit::OK));
    for f in ["report.json", "trace.csv", "trajectory.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let header = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(header.starts_with("k,y_1,y_d_1,y_e_1,u_1\n"));

    let st = Proc::new(BIN).args(["check", "--scenario", "nope"]).status().unwrap();
    assert_eq!(st.code(), Some(exit::CONFIG));

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"plant\": 1}").unwrap();
    let st = Proc::new(BIN).args(["check", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(st.code(), Some(exit::CONFIG));

    let sweep = tmp.path().join("sweep");
    let st = Proc::new(BIN)
        .args(["sweep-k0", "--scenario", "rot_tracking", "--filter-radius", "0.7", "--k0-list", "10,40", "--out"])
        .arg(&sweep)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(exit::OK));
    let csv = fs::read_to_string(sweep.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn seed_override_changes_the_hash_and_data() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let st = Proc::new(BIN)
            .args(["learn", "--scenario", "rot_tracking", "--seed", seed, "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(exit::OK));
        (report(&out)["config_hash"].clone(), fs::read(out.join("trace.csv")).unwrap())
    };
    let a = run("7", "a");
    let b = run("7", "b");
    let c = run("8", "c");
    assert_eq!(a, b);
    assert_ne!(a.0, c.0);
    assert_ne!(a.1, c.1);
}
