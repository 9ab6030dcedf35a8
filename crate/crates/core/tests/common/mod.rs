#![allow(dead_code)]

use offtrack::linalg::{self, Mat, Vector};
use offtrack::problem::{FilterChoice, Problem};
use offtrack::system::{Exosystem, Plant, Weights};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn m(rows: &[&[f64]]) -> Mat {
    linalg::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

pub fn rotation(th: f64) -> Exosystem {
    Exosystem::new(
        m(&[&[th.cos(), -th.sin()], &[th.sin(), th.cos()]]),
        m(&[&[1.0, 0.0]]),
        vec![1.0, -2.0 * th.cos(), 1.0],
    )
    .unwrap()
}

pub fn step() -> Exosystem {
    Exosystem::new(m(&[&[1.0]]), m(&[&[1.0]]), vec![1.0, -1.0]).unwrap()
}

pub fn unit_weights(p: usize, q: usize) -> Weights {
    Weights::new(Mat::identity(p, p), Mat::identity(q, q)).unwrap()
}

pub fn scalar_step(filter: FilterChoice) -> Problem {
    let plant = Plant::new(m(&[&[0.5]]), m(&[&[1.0]]), m(&[&[1.0]])).unwrap();
    Problem::new(plant, step(), unit_weights(1, 1), None, filter, 1).unwrap()
}

pub fn rot_tracking(filter: FilterChoice) -> Problem {
    let plant = Plant::new(m(&[&[0.0, 1.0], &[-0.5, 0.3]]), m(&[&[0.0], &[1.0]]), m(&[&[1.0, 0.0]])).unwrap();
    Problem::new(plant, rotation(0.3), unit_weights(1, 1), None, filter, 7).unwrap()
}

pub fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random problem whose augmented pair is controllable and observable, or
/// `None` when the draw fails those checks.
pub fn random_problem(rng: &mut ChaCha8Rng, seed: u64) -> Option<Problem> {
    let n = rng.gen_range(1..=4);
    let p = rng.gen_range(1..=2);
    let mmin = 1;
    let mi = rng.gen_range(mmin..=p);
    let exo = if rng.gen_bool(0.5) {
        let q = p;
        Exosystem::new(Mat::identity(q, q), Mat::identity(p, q), vec![1.0, -1.0]).ok()?
    } else {
        let th = rng.gen_range(0.1..1.5);
        if p == 1 {
            rotation(th)
        } else {
            let s = linalg::block_diag(&[rotation(th).s, rotation(th).s]);
            let r = m(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]]);
            Exosystem::new(s, r, vec![1.0, -2.0 * th.cos(), 1.0]).ok()?
        }
    };
    let plant = Plant::new(rand_mat(rng, n, n), rand_mat(rng, n, mi), rand_mat(rng, p, n)).ok()?;
    let pb = Problem::new(plant, exo, unit_weights(p, mi), None, FilterChoice::Deadbeat, seed).ok()?;
    let s = &pb.aug.structure;
    (pb.assumptions.all_pass() && s.controllable && s.observable && pb.aug.n_z <= 8).then_some(pb)
}
