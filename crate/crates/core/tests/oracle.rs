mod common;

use common::*;
use offtrack::linalg::{self, Mat, Vector};
use offtrack::oracle::{self, LqProblem};
use offtrack::problem::FilterChoice;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn hewer_on_random_augmented_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut done = 0;
    let mut seed = 0;
    while done < 20 {
        seed += 1;
        let Some(pb) = random_problem(&mut rng, seed) else { continue };
        let lq = pb.lq().unwrap();
        let run = pb.oracle(500, 1e-12).unwrap();
        assert!(run.converged);
        let gap = oracle::monotonicity_gap(&run).unwrap();
        assert!(gap >= -oracle::MONOTONE_SLACK * (1.0 + run.iterates[0].kernel.norm()), "gap {gap}");
        let res = oracle::dare_residual(&lq, &run.kernel).unwrap();
        assert!(res <= 1e-8 * (1.0 + run.kernel.norm()), "residual {res}");
        done += 1;
    }
}

#[test]
fn pure_plant_scalar_dare() {
    let lq = LqProblem::new(m(&[&[0.5]]), m(&[&[1.0]]), m(&[&[1.0]]), m(&[&[1.0]])).unwrap();
    let run = oracle::hewer_iterate(&lq, &Mat::zeros(1, 1), 100, 1e-13).unwrap();
    assert!((run.kernel[(0, 0)] - 1.13278).abs() < 1e-5);
    assert!((run.gain[(0, 0)] - 0.26557).abs() < 1e-5);
}

/// The regulator solution makes `e = r - X xd` evolve autonomously under the
/// closed loop with `theta = y_d`.
#[test]
fn regulator_error_recursion() {
    for pb in [rot_tracking(FilterChoice::Deadbeat), scalar_step(FilterChoice::Deadbeat)] {
        let run = pb.oracle(200, 1e-12).unwrap();
        let a_cl = &pb.aug.under_a - &pb.aug.bar_b * &run.gain;
        let sol = oracle::solve_regulator_equations(&a_cl, &pb.aug.bar_g, &pb.aug.bar_c, &pb.exo).unwrap();
        assert!(sol.residuals.0 <= 1e-8 && sol.residuals.1 <= 1e-8);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut r = rand_vec(&mut rng, pb.aug.n_z);
        let mut xd = rand_vec(&mut rng, pb.exo.n_states());
        let mut e = &r - &sol.x * &xd;
        for _ in 0..200 {
            let yd = &pb.exo.r * &xd;
            r = &a_cl * &r + &pb.aug.bar_g * yd;
            xd = &pb.exo.s * &xd;
            e = &a_cl * &e;
            let direct = &r - &sol.x * &xd;
            assert!((&direct - &e).amax() <= 1e-9 * (1.0 + e.amax()));
        }
        // Tracking: the output error decays with the closed-loop state error.
        let ye = &pb.aug.bar_c * &r - &pb.exo.r * &xd;
        assert!(ye.amax() < 1e-8);
    }
}

#[test]
fn optimal_gain_minimizes_cost() {
    let pb = rot_tracking(FilterChoice::Deadbeat);
    let lq = pb.lq().unwrap();
    let run = pb.oracle(200, 1e-13).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let e0 = rand_vec(&mut rng, pb.aug.n_z);
    let best = oracle::evaluate_cost(&lq, &run.gain, &e0, 1_000_000).unwrap();
    assert!((best - e0.dot(&(&run.kernel * &e0))).abs() <= 1e-6 * (1.0 + best));
    let mut tried = 0;
    while tried < 20 {
        let k = &run.gain + rand_mat(&mut rng, 1, pb.aug.n_z) * 0.1;
        if linalg::spectral_radius(&lq.closed_loop(&k)).unwrap() >= 0.99 {
            continue;
        }
        tried += 1;
        assert!(oracle::evaluate_cost(&lq, &k, &e0, 1_000_000).unwrap() >= best - 1e-9 * best);
    }
    assert_eq!(oracle::evaluate_cost(&lq, &run.gain, &Vector::zeros(pb.aug.n_z), 10).unwrap(), 0.0);
}

#[test]
fn structure_is_reported_for_bundled_problems() {
    for pb in [rot_tracking(FilterChoice::Deadbeat), scalar_step(FilterChoice::Deadbeat)] {
        let s = &pb.aug.structure;
        assert!(s.stabilizable && s.detectable && s.controllable && s.observable);
    }
}
