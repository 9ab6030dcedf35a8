//! Plant, exosystem and the augmented tracking system.
//!
//! The plant `x+ = A x + B u, y = C x` follows a reference produced by the
//! exosystem `xd+ = S xd, yd = R xd`. An `r_p`-copy internal model `(F, G)`
//! built from the minimal polynomial of `S` together with a feedforward gain
//! `T` turns tracking into an LQ regulation problem on the augmented state
//! `[x; z]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Cplx, Mat, Vector};

/// Tolerance on eigenvalue moduli when deciding "on or outside the unit circle".
const UNIT_CIRCLE_TOL: f64 = 1e-9;
const ANNIHILATION_TOL: f64 = 1e-9;
const FEEDFORWARD_DRAWS: usize = 10;
/// Simulations abort once the state norm exceeds this.
pub const DIVERGENCE_NORM: f64 = 1e8;

fn check_shape(m: &Mat, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::Dimension(format!(
            "{what} must be {rows}x{cols}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
}

impl Plant {
    pub fn new(a: Mat, b: Mat, c: Mat) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::Dimension("plant dimensions must be >= 1".into()));
        }
        check_shape(&a, n, n, "A")?;
        check_shape(&b, n, b.ncols(), "B")?;
        check_shape(&c, c.nrows(), n, "C")?;
        Ok(Self { a, b, c })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }
}

/// Reference generator. `minimal_poly` holds monic coefficients in descending
/// powers, e.g. `[1, -1]` for `z - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Exosystem {
    pub s: Mat,
    pub r: Mat,
    pub minimal_poly: Vec<f64>,
}

impl Exosystem {
    pub fn new(s: Mat, r: Mat, minimal_poly: Vec<f64>) -> Result<Self> {
        let q = s.nrows();
        if q == 0 {
            return Err(Error::Dimension("exosystem needs at least one state".into()));
        }
        check_shape(&s, q, q, "S")?;
        check_shape(&r, r.nrows(), q, "R")?;
        if minimal_poly.len() < 2 {
            return Err(Error::NonMonicPolynomial {
                leading: minimal_poly.first().copied().unwrap_or(0.0),
            });
        }
        Ok(Self { s, r, minimal_poly })
    }

    pub fn n_states(&self) -> usize {
        self.s.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.r.nrows()
    }

    /// Degree of the minimal polynomial.
    pub fn degree(&self) -> usize {
        self.minimal_poly.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub q: Mat,
    pub r: Mat,
}

impl Weights {
    pub fn new(q: Mat, r: Mat) -> Result<Self> {
        for (m, what) in [(&q, "Q"), (&r, "R")] {
            if m.nrows() != m.ncols() {
                return Err(Error::NotSquare {
                    rows: m.nrows(),
                    cols: m.ncols(),
                });
            }
            let min = linalg::min_sym_eigenvalue(m)?;
            if min <= linalg::PD_TOL {
                return Err(Error::NotPositiveDefinite {
                    what: if what == "Q" { "Q" } else { "R" },
                    min_eigenvalue: min,
                });
            }
        }
        Ok(Self {
            q: linalg::symmetrize(&q),
            r: linalg::symmetrize(&r),
        })
    }
}

/// Block-diagonal `r_p`-copy realization of the exosystem's minimal polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalModel {
    pub f: Mat,
    pub g: Mat,
    pub degree: usize,
    pub copies: usize,
}

impl InternalModel {
    pub fn dim(&self) -> usize {
        self.f.nrows()
    }
}

pub fn build_internal_model(exo: &Exosystem, r_p: usize) -> Result<InternalModel> {
    let poly = &exo.minimal_poly;
    let leading = poly[0];
    if (leading - 1.0).abs() > 1e-12 || poly.len() < 2 {
        return Err(Error::NonMonicPolynomial { leading });
    }
    if r_p == 0 {
        return Err(Error::Dimension("internal model needs r_p >= 1".into()));
    }
    let d = poly.len() - 1;
    let block = linalg::companion(&poly[1..]);
    let mut gb = Mat::zeros(d, 1);
    gb[(d - 1, 0)] = 1.0;
    let f = linalg::block_diag(&vec![block; r_p]);
    let g = linalg::block_diag(&vec![gb; r_p]);
    Ok(InternalModel {
        f,
        g,
        degree: d,
        copies: r_p,
    })
}

/// Draws `T` uniformly on `[-1, 1]` until `(F, T)` is observable.
pub fn choose_feedforward(model: &InternalModel, r_m: usize, seed: u64) -> Result<Mat> {
    if model.copies < r_m {
        return Err(Error::Dimension(format!(
            "feedforward design needs r_p >= r_m (r_p = {}, r_m = {r_m})",
            model.copies
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..FEEDFORWARD_DRAWS {
        let t = Mat::from_fn(r_m, model.dim(), |_, _| rng.gen_range(-1.0..=1.0));
        if linalg::is_observable(&model.f, &t) {
            return Ok(t);
        }
    }
    Err(Error::FeedforwardNotObservable {
        attempts: FEEDFORWARD_DRAWS,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssumptionReport {
    pub controllable: bool,
    pub observable: bool,
    /// (A, B) controllable and (A, C) observable.
    pub plant_minimal: bool,
    /// Every eigenvalue of S on or outside the unit circle.
    pub reference_persistent: bool,
    /// The supplied minimal polynomial annihilates S.
    pub polynomial_annihilates: bool,
    /// Rank of [[A - lI, B], [C, 0]] is r_n + r_p for every eigenvalue l of S.
    pub no_blocking_zero: bool,
    pub diagnostics: Vec<String>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.plant_minimal && self.reference_persistent && self.polynomial_annihilates && self.no_blocking_zero
    }
}

pub fn check_assumptions(plant: &Plant, exo: &Exosystem) -> Result<AssumptionReport> {
    if plant.n_outputs() != exo.n_outputs() {
        return Err(Error::Dimension(format!(
            "plant has {} outputs, reference has {}",
            plant.n_outputs(),
            exo.n_outputs()
        )));
    }
    let n = plant.n_states();
    let m = plant.n_inputs();
    let p = plant.n_outputs();
    let mut rep = AssumptionReport::default();

    let rc = linalg::rank(&linalg::ctrb(&plant.a, &plant.b));
    let ro = linalg::rank(&linalg::obsv(&plant.a, &plant.c));
    rep.controllable = rc == n;
    rep.observable = ro == n;
    rep.plant_minimal = rep.controllable && rep.observable;
    if !rep.controllable {
        rep.diagnostics
            .push(format!("plant: rank ctrb(A,B) = {rc} < {n}"));
    }
    if !rep.observable {
        rep.diagnostics
            .push(format!("plant: rank obsv(A,C) = {ro} < {n}"));
    }

    let eig_s = linalg::eigenvalues(&exo.s)?;
    rep.reference_persistent = true;
    for l in &eig_s {
        if l.norm() < 1.0 - UNIT_CIRCLE_TOL {
            rep.reference_persistent = false;
            rep.diagnostics.push(format!(
                "reference: eigenvalue {:.6}{:+.6}i of S has modulus {:.6} < 1",
                l.re,
                l.im,
                l.norm()
            ));
        }
    }

    let annihilated = linalg::poly_eval_matrix(&exo.minimal_poly, &exo.s)?;
    let res = annihilated.norm();
    let scale = 1.0 + exo.s.norm().powi(exo.degree() as i32);
    rep.polynomial_annihilates = res <= ANNIHILATION_TOL * scale;
    if !rep.polynomial_annihilates {
        rep.diagnostics.push(format!(
            "reference: minimal polynomial leaves residual {res:.3e} on S"
        ));
    }

    rep.no_blocking_zero = true;
    for l in &eig_s {
        let mut re = Mat::zeros(n + p, n + m);
        let mut im = Mat::zeros(n + p, n + m);
        re.view_mut((0, 0), (n, n))
            .copy_from(&(&plant.a - Mat::identity(n, n) * l.re));
        re.view_mut((0, n), (n, m)).copy_from(&plant.b);
        re.view_mut((n, 0), (p, n)).copy_from(&plant.c);
        im.view_mut((0, 0), (n, n))
            .copy_from(&(-Mat::identity(n, n) * l.im));
        let rk = linalg::complex_rank(&re, &im, linalg::RANK_TOL)?;
        if rk != n + p {
            rep.no_blocking_zero = false;
            rep.diagnostics.push(format!(
                "blocking zero: rank [[A-lI, B], [C, 0]] = {rk} < {} at l = {:.6}{:+.6}i",
                n + p,
                l.re,
                l.im
            ));
        }
    }
    Ok(rep)
}

/// PBH-based structural properties of the augmented pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StructureReport {
    pub stabilizable: bool,
    pub detectable: bool,
    pub controllable: bool,
    pub observable: bool,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    /// `[[A, -B T], [-G C, F]]`
    pub under_a: Mat,
    /// `[B; 0]`
    pub bar_b: Mat,
    /// `[C, 0]`
    pub bar_c: Mat,
    /// `[0; G]`
    pub bar_g: Mat,
    pub t: Mat,
    pub n_z: usize,
    pub structure: StructureReport,
}

impl AugmentedSystem {
    pub fn n_inputs(&self) -> usize {
        self.bar_b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.bar_c.nrows()
    }

    /// State weight `C' Q C` of the tracking cost.
    pub fn state_weight(&self, weights: &Weights) -> Mat {
        self.bar_c.transpose() * &weights.q * &self.bar_c
    }
}

pub fn build_augmented(plant: &Plant, model: &InternalModel, t: &Mat) -> Result<AugmentedSystem> {
    let n = plant.n_states();
    let m = plant.n_inputs();
    let p = plant.n_outputs();
    let nm = model.dim();
    if model.g.ncols() != p {
        return Err(Error::Dimension(format!(
            "internal model has {} channels, plant has {p} outputs",
            model.g.ncols()
        )));
    }
    check_shape(t, m, nm, "T")?;
    let n_z = n + nm;

    let mut under_a = Mat::zeros(n_z, n_z);
    under_a.view_mut((0, 0), (n, n)).copy_from(&plant.a);
    under_a
        .view_mut((0, n), (n, nm))
        .copy_from(&(-(&plant.b * t)));
    under_a
        .view_mut((n, 0), (nm, n))
        .copy_from(&(-(&model.g * &plant.c)));
    under_a.view_mut((n, n), (nm, nm)).copy_from(&model.f);

    let mut bar_b = Mat::zeros(n_z, m);
    bar_b.view_mut((0, 0), (n, m)).copy_from(&plant.b);
    let mut bar_c = Mat::zeros(p, n_z);
    bar_c.view_mut((0, 0), (p, n)).copy_from(&plant.c);
    let mut bar_g = Mat::zeros(n_z, p);
    bar_g.view_mut((n, 0), (nm, p)).copy_from(&model.g);

    let structure = structure_report(&under_a, &bar_b, &bar_c)?;
    Ok(AugmentedSystem {
        under_a,
        bar_b,
        bar_c,
        bar_g,
        t: t.clone(),
        n_z,
        structure,
    })
}

pub fn structure_report(a: &Mat, b: &Mat, c: &Mat) -> Result<StructureReport> {
    let n = a.nrows();
    let mut rep = StructureReport {
        stabilizable: true,
        detectable: true,
        controllable: linalg::is_controllable(a, b),
        observable: linalg::is_observable(a, c),
        diagnostics: Vec::new(),
    };
    let ct = c.transpose();
    let at = a.transpose();
    for l in linalg::eigenvalues(a)? {
        if l.norm() < 1.0 - UNIT_CIRCLE_TOL {
            continue;
        }
        let rb = linalg::pbh_rank_test(a, b, l)?;
        if rb < n {
            rep.stabilizable = false;
            rep.diagnostics.push(format!(
                "(A, B) loses rank {rb} < {n} at eigenvalue {:.6}{:+.6}i",
                l.re, l.im
            ));
        }
        let rc = linalg::pbh_rank_test(&at, &ct, l.conj())?;
        if rc < n {
            rep.detectable = false;
            rep.diagnostics.push(format!(
                "(A, C) loses rank {rc} < {n} at eigenvalue {:.6}{:+.6}i",
                l.re, l.im
            ));
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub k: usize,
    pub x: Vector,
    pub y: Vector,
    pub xd: Vector,
    pub yd: Vector,
    pub ye: Vector,
    pub u: Vector,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// Set when the run stopped early on a non-finite or exploding state.
    pub truncated: Option<String>,
}

/// Open-loop recursion of plant and exosystem under `input(k)`.
pub fn simulate<F>(
    plant: &Plant,
    exo: &Exosystem,
    mut input: F,
    x0: &Vector,
    xd0: &Vector,
    horizon: usize,
) -> Result<Trajectory>
where
    F: FnMut(usize) -> Vector,
{
    if x0.len() != plant.n_states() || xd0.len() != exo.n_states() {
        return Err(Error::Dimension("initial state lengths".into()));
    }
    if plant.n_outputs() != exo.n_outputs() {
        return Err(Error::Dimension("plant and reference output counts".into()));
    }
    let mut x = x0.clone();
    let mut xd = xd0.clone();
    let mut traj = Trajectory::default();
    for k in 0..horizon {
        let u = input(k);
        if u.len() != plant.n_inputs() {
            return Err(Error::Dimension(format!(
                "input at k = {k} has length {}",
                u.len()
            )));
        }
        let norm = x.norm();
        if !norm.is_finite() || norm > DIVERGENCE_NORM || u.iter().any(|v| !v.is_finite()) {
            traj.truncated = Some(format!("state norm {norm:.3e} at k = {k}"));
            break;
        }
        let y = &plant.c * &x;
        let yd = &exo.r * &xd;
        let ye = &y - &yd;
        let x_next = &plant.a * &x + &plant.b * &u;
        let xd_next = &exo.s * &xd;
        traj.samples.push(TrajectorySample {
            k,
            x,
            y,
            xd,
            yd,
            ye,
            u,
        });
        x = x_next;
        xd = xd_next;
    }
    Ok(traj)
}

/// Eigenvalues of `S`, exposed for reporting.
pub fn reference_modes(exo: &Exosystem) -> Result<Vec<Cplx>> {
    linalg::eigenvalues(&exo.s)
}
