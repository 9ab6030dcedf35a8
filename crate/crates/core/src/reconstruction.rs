//! Input/output filter banks and the model-based map from filter states to
//! the augmented state.
//!
//! Each scalar signal drives a copy of `zeta+ = A_zeta zeta + v b` where
//! `A_zeta` is the companion matrix of the monic Schur polynomial `d(z)` and
//! `b = e_n`. Filter state `p` (0-based) then carries `z^p / d(z)` applied to
//! the signal. With `d(z) = z^n` the bank is a tapped delay line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::system::AugmentedSystem;

const PLACEMENT_ATTEMPTS: usize = 10;
const PLACEMENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    /// `d_1 .. d_n` of `z^n + d_1 z^{n-1} + .. + d_n`.
    pub d: Vec<f64>,
    pub a_zeta: Mat,
    pub b: Vector,
}

impl FilterSpec {
    pub fn from_coeffs(d: Vec<f64>) -> Result<Self> {
        let n = d.len();
        if n == 0 {
            return Err(Error::Dimension("filter order must be >= 1".into()));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("filter coefficients"));
        }
        let a_zeta = linalg::companion(&d);
        let rho = linalg::spectral_radius(&a_zeta)?;
        // Repeated roots on the circle come back perturbed by ~sqrt(eps).
        if rho >= 1.0 - 1e-6 {
            return Err(Error::UnstableFilter { modulus: rho });
        }
        let mut b = Vector::zeros(n);
        b[n - 1] = 1.0;
        Ok(Self { d, a_zeta, b })
    }

    /// `d(z) = z^n`.
    pub fn deadbeat(n: usize) -> Result<Self> {
        Self::from_coeffs(vec![0.0; n])
    }

    /// `d(z) = z^n - rho0^n`: simple roots evenly spaced on the circle of
    /// radius `rho0`, so the reconstruction error decays like `rho0^k`.
    pub fn with_radius(n: usize, rho0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho0) {
            return Err(Error::UnstableFilter { modulus: rho0.abs() });
        }
        let mut d = vec![0.0; n];
        if n > 0 {
            d[n - 1] = -rho0.powi(n as i32);
        }
        Self::from_coeffs(d)
    }

    /// `d(z) = (z - rho0)^n`. The repeated root adds a `k^(n-1)` transient.
    pub fn repeated_root(n: usize, rho0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho0) {
            return Err(Error::UnstableFilter { modulus: rho0.abs() });
        }
        // Binomial expansion, descending powers.
        let mut poly = vec![1.0];
        for _ in 0..n {
            let mut next = vec![0.0; poly.len() + 1];
            for (i, c) in poly.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= rho0 * c;
            }
            poly = next;
        }
        Self::from_coeffs(poly[1..].to_vec())
    }

    pub fn order(&self) -> usize {
        self.d.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub spec: FilterSpec,
    pub zeta_u: Vector,
    pub zeta_y: Vector,
    pub zeta_th: Vector,
    pub k: usize,
    r_m: usize,
    r_p: usize,
}

impl FilterBank {
    pub fn new(spec: FilterSpec, r_m: usize, r_p: usize) -> Self {
        let n = spec.order();
        Self {
            spec,
            zeta_u: Vector::zeros(n * r_m),
            zeta_y: Vector::zeros(n * r_p),
            zeta_th: Vector::zeros(n * r_p),
            k: 0,
            r_m,
            r_p,
        }
    }

    pub fn dim(&self) -> usize {
        self.spec.order() * (self.r_m + 2 * self.r_p)
    }

    fn advance(spec: &FilterSpec, zeta: &mut Vector, input: &Vector) {
        let n = spec.order();
        for (c, v) in input.iter().enumerate() {
            let mut block = zeta.rows_mut(c * n, n);
            let next = &spec.a_zeta * &block + &spec.b * *v;
            block.copy_from(&next);
        }
    }

    pub fn step(&mut self, u: &Vector, y: &Vector, th: &Vector) -> Result<()> {
        if u.len() != self.r_m || y.len() != self.r_p || th.len() != self.r_p {
            return Err(Error::Dimension(format!(
                "filter inputs: expected ({}, {}, {}), got ({}, {}, {})",
                self.r_m,
                self.r_p,
                self.r_p,
                u.len(),
                y.len(),
                th.len()
            )));
        }
        Self::advance(&self.spec, &mut self.zeta_u, u);
        Self::advance(&self.spec, &mut self.zeta_y, y);
        Self::advance(&self.spec, &mut self.zeta_th, th);
        self.k += 1;
        Ok(())
    }

    /// `[zeta_u; zeta_y; zeta_th]`
    pub fn zeta_bar(&self) -> Vector {
        let mut out = Vector::zeros(self.dim());
        let a = self.zeta_u.len();
        let b = self.zeta_y.len();
        out.rows_mut(0, a).copy_from(&self.zeta_u);
        out.rows_mut(a, b).copy_from(&self.zeta_y);
        out.rows_mut(a + b, self.zeta_th.len())
            .copy_from(&self.zeta_th);
        out
    }
}

/// The system the filters observe: `r+ = a r + b u + g th`, `y = c r`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSystem {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub g: Mat,
}

impl From<&AugmentedSystem> for DataSystem {
    fn from(aug: &AugmentedSystem) -> Self {
        Self {
            a: aug.under_a.clone(),
            b: aug.bar_b.clone(),
            c: aug.bar_c.clone(),
            g: aug.bar_g.clone(),
        }
    }
}

/// Characteristic polynomial coefficients of `a - l c` must match `spec.d`.
fn placement_error(sys: &DataSystem, spec: &FilterSpec, l: &Mat) -> Result<f64> {
    let (d, _) = linalg::faddeev_leverrier(&(&sys.a - l * &sys.c))?;
    Ok(d
        .iter()
        .zip(&spec.d)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

fn placement_scale(sys: &DataSystem) -> f64 {
    1.0 + sys.a.norm().powi(sys.a.nrows() as i32)
}

/// Observer gain placing the spectrum of `a - L c` at the roots of `d(z)`,
/// by a Sylvester equation on the dual pair with a random right-hand side.
/// Falls back to Ackermann's formula on a random output combination when the
/// Sylvester route keeps failing (for instance when `a` shares a root with `d`).
pub fn observer_gain(sys: &DataSystem, spec: &FilterSpec, seed: u64) -> Result<Mat> {
    let n = sys.a.nrows();
    let p = sys.c.nrows();
    if spec.order() != n {
        return Err(Error::Dimension(format!(
            "filter order {} differs from state dimension {n}",
            spec.order()
        )));
    }
    if !linalg::is_observable(&sys.a, &sys.c) {
        return Err(Error::PlacementFailed {
            attempts: 0,
            reason: "output pair is not observable".into(),
        });
    }
    let tol = PLACEMENT_TOL * placement_scale(sys);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let at = sys.a.transpose();
    let ct = sys.c.transpose();
    let mut last = String::from("no attempt");
    for _ in 0..PLACEMENT_ATTEMPTS {
        let gr = Mat::from_fn(p, n, |_, _| rng.gen_range(-1.0..1.0));
        let x = match linalg::solve_sylvester(&at, &spec.a_zeta, &(&ct * &gr)) {
            Ok(x) => x,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        let sv = linalg::singular_values(&x);
        let cond = sv.max() / sv.min();
        let Some(xi) = x.clone().try_inverse().filter(|_| cond.is_finite() && cond < 1e12) else {
            last = format!("Sylvester solution condition {cond:.3e}");
            continue;
        };
        let l = (gr * xi).transpose();
        let err = placement_error(sys, spec, &l)?;
        if err <= tol {
            return Ok(l);
        }
        last = format!("coefficient mismatch {err:.3e}");
    }
    for _ in 0..PLACEMENT_ATTEMPTS {
        let w = Vector::from_fn(p, |_, _| rng.gen_range(-1.0..1.0));
        let cw = Mat::from_row_slice(1, n, (w.transpose() * &sys.c).as_slice());
        let o = linalg::obsv(&sys.a, &cw);
        let Some(oi) = o.try_inverse() else { continue };
        let mut poly = vec![1.0];
        poly.extend_from_slice(&spec.d);
        let phi = linalg::poly_eval_matrix(&poly, &sys.a)?;
        let mut en = Vector::zeros(n);
        en[n - 1] = 1.0;
        let l = (phi * oi * en) * w.transpose();
        let err = placement_error(sys, spec, &l)?;
        if err <= tol {
            return Ok(l);
        }
        last = format!("coefficient mismatch {err:.3e}");
    }
    Err(Error::PlacementFailed {
        attempts: PLACEMENT_ATTEMPTS,
        reason: last,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameterization {
    pub m_bar: Mat,
    pub l_obs: Mat,
    /// `B_0 .. B_{n-1}` with `B_0 = I`, `B_{i+1} = B_i A_o + d_{i+1} I`.
    pub resolvent: Vec<Mat>,
}

/// Matrix `M` with `r(k) = M zeta_bar(k) + (a - L c)^k r(0)` for zero-initial filters.
pub fn parameterization_matrix(
    sys: &DataSystem,
    spec: &FilterSpec,
    l_obs: &Mat,
) -> Result<Parameterization> {
    let n = sys.a.nrows();
    if spec.order() != n || l_obs.shape() != (n, sys.c.nrows()) {
        return Err(Error::Dimension("parameterization inputs".into()));
    }
    let a_o = &sys.a - l_obs * &sys.c;
    let mut resolvent = Vec::with_capacity(n);
    let mut bi = Mat::identity(n, n);
    for i in 0..n {
        resolvent.push(bi.clone());
        if i + 1 < n {
            bi = &bi * &a_o + Mat::identity(n, n) * spec.d[i];
        }
    }
    let inputs = [&sys.b, l_obs, &sys.g];
    let cols: usize = inputs.iter().map(|m| m.ncols()).sum();
    let mut m_bar = Mat::zeros(n, n * cols);
    let mut c0 = 0;
    for inp in inputs {
        for col in inp.column_iter() {
            for p in 0..n {
                m_bar
                    .column_mut(c0 + p)
                    .copy_from(&(&resolvent[n - 1 - p] * col));
            }
            c0 += n;
        }
    }
    Ok(Parameterization {
        m_bar,
        l_obs: l_obs.clone(),
        resolvent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankComparison {
    pub rank_m: usize,
    pub rank_ctrb: usize,
    pub equal: bool,
}

pub fn parameterization_rank_check(sys: &DataSystem, l_obs: &Mat, m_bar: &Mat) -> RankComparison {
    let blocks = [
        linalg::ctrb(&sys.a, &sys.b),
        linalg::ctrb(&sys.a, l_obs),
        linalg::ctrb(&sys.a, &sys.g),
    ];
    let n = sys.a.nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut cat = Mat::zeros(n, cols);
    let mut c0 = 0;
    for b in &blocks {
        cat.view_mut((0, c0), b.shape()).copy_from(b);
        c0 += b.ncols();
    }
    let rank_m = linalg::rank(m_bar);
    let rank_ctrb = linalg::rank(&cat);
    RankComparison {
        rank_m,
        rank_ctrb,
        equal: rank_m == rank_ctrb,
    }
}
