//! Linear regression form of the output-feedback Bellman equation.
//!
//! With `w = ubar + K_o zeta` each logged sample gives one row
//!
//! ```text
//!   (zeta+' L_P zeta+ - zeta' L_P zeta) - 2 zeta' L1 w - ubar' L2 ubar + (K_o zeta)' L2 (K_o zeta)
//!     - 2 zeta' L3 theta - 2 theta' L4 ubar - theta' L5 theta
//!   = -y' Q y - (K_o zeta)' R (K_o zeta)
//! ```
//!
//! which is linear in the six unknown kernels. For a model `(A, B, C, G)`,
//! parameterization `M` and the kernel `P` certifying `K` (with `K_o = K M`)
//! the kernels are `L_P = M'PM`, `L1 = M'A'PB`, `L2 = B'PB`, `L3 = M'A'PG`,
//! `L4 = G'PB`, `L5 = G'PG`.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::reconstruction::DataSystem;
use crate::system::Weights;

use super::behavior::DataLog;

/// Column spans of the unknown vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelLayout {
    pub n_zeta: usize,
    pub r_m: usize,
    pub r_p: usize,
    pub lp: Range<usize>,
    pub l1: Range<usize>,
    pub l2: Range<usize>,
    pub l3: Range<usize>,
    pub l4: Range<usize>,
    pub l5: Range<usize>,
}

impl KernelLayout {
    pub fn new(n_zeta: usize, r_m: usize, r_p: usize) -> Self {
        let sizes = [
            linalg::tri_len(n_zeta),
            n_zeta * r_m,
            linalg::tri_len(r_m),
            n_zeta * r_p,
            r_p * r_m,
            linalg::tri_len(r_p),
        ];
        let mut spans = Vec::with_capacity(6);
        let mut start = 0;
        for s in sizes {
            spans.push(start..start + s);
            start += s;
        }
        Self {
            n_zeta,
            r_m,
            r_p,
            lp: spans[0].clone(),
            l1: spans[1].clone(),
            l2: spans[2].clone(),
            l3: spans[3].clone(),
            l4: spans[4].clone(),
            l5: spans[5].clone(),
        }
    }

    /// Number of unknowns, which is also the rank the data must reach.
    pub fn n_cols(&self) -> usize {
        self.l5.end
    }

    /// Spans of the blocks other than `L_P`.
    pub fn cross_span(&self) -> Range<usize> {
        self.l1.start..self.l5.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedKernels {
    pub lp: Mat,
    pub l1: Mat,
    pub l2: Mat,
    pub l3: Mat,
    pub l4: Mat,
    pub l5: Mat,
}

impl LearnedKernels {
    pub fn pack(&self, layout: &KernelLayout) -> Result<Vector> {
        let mut v = Vector::zeros(layout.n_cols());
        v.rows_mut(layout.lp.start, layout.lp.len())
            .copy_from(&linalg::vecs(&self.lp)?);
        v.rows_mut(layout.l1.start, layout.l1.len())
            .copy_from(&linalg::vec(&self.l1));
        v.rows_mut(layout.l2.start, layout.l2.len())
            .copy_from(&linalg::vecs(&self.l2)?);
        v.rows_mut(layout.l3.start, layout.l3.len())
            .copy_from(&linalg::vec(&self.l3));
        v.rows_mut(layout.l4.start, layout.l4.len())
            .copy_from(&linalg::vec(&self.l4));
        v.rows_mut(layout.l5.start, layout.l5.len())
            .copy_from(&linalg::vecs(&self.l5)?);
        Ok(v)
    }

    pub fn unpack(v: &Vector, layout: &KernelLayout) -> Result<Self> {
        if v.len() != layout.n_cols() {
            return Err(Error::Dimension(format!(
                "kernel vector has {} entries, layout needs {}",
                v.len(),
                layout.n_cols()
            )));
        }
        let s = v.as_slice();
        let (n, m, p) = (layout.n_zeta, layout.r_m, layout.r_p);
        Ok(Self {
            lp: linalg::unvecs(&s[layout.lp.clone()], n)?,
            l1: linalg::unvec(&s[layout.l1.clone()], n, m)?,
            l2: linalg::unvecs(&s[layout.l2.clone()], m)?,
            l3: linalg::unvec(&s[layout.l3.clone()], n, p)?,
            l4: linalg::unvec(&s[layout.l4.clone()], p, m)?,
            l5: linalg::unvecs(&s[layout.l5.clone()], p)?,
        })
    }

    /// Stacked `L1 .. L5`, the part that is unique under the rank condition.
    pub fn cross_vector(&self, layout: &KernelLayout) -> Result<Vector> {
        let v = self.pack(layout)?;
        Ok(v.rows(layout.l1.start, layout.cross_span().len()).into_owned())
    }

    /// Kernels implied by a model, its parameterization and value kernel `p`.
    pub fn from_model(sys: &DataSystem, m_bar: &Mat, p: &Mat) -> Self {
        let mt = m_bar.transpose();
        let at_p = sys.a.transpose() * p;
        Self {
            lp: linalg::symmetrize(&(&mt * p * m_bar)),
            l1: &mt * &at_p * &sys.b,
            l2: linalg::symmetrize(&(sys.b.transpose() * p * &sys.b)),
            l3: &mt * &at_p * &sys.g,
            l4: sys.g.transpose() * p * &sys.b,
            l5: linalg::symmetrize(&(sys.g.transpose() * p * &sys.g)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorSystem {
    pub rho: Mat,
    pub nu: Vector,
    pub layout: KernelLayout,
    /// Quadratic monomials `[zeta zeta, ubar (x) zeta, ubar ubar, theta (x) zeta,
    /// ubar (x) theta, theta theta]` per sample, used for the rank condition.
    pub data: Mat,
}

fn log_dims(log: &DataLog) -> Result<(usize, usize, usize)> {
    let first = log.samples.first().ok_or(Error::InsufficientSamples {
        have: 0,
        need: 1,
    })?;
    Ok((first.zeta.len(), first.ubar.len(), first.theta.len()))
}

fn put(row: &mut [f64], at: usize, vals: &Vector) {
    row[at..at + vals.len()].copy_from_slice(vals.as_slice());
}

/// Builds `rho v = nu` for the gain `k_o` from a fixed data log.
pub fn assemble_regressors(log: &DataLog, k_o: &Mat, weights: &Weights) -> Result<RegressorSystem> {
    let (n, m, p) = log_dims(log)?;
    let layout = KernelLayout::new(n, m, p);
    let cols = layout.n_cols();
    if log.len() < cols {
        return Err(Error::InsufficientSamples {
            have: log.len(),
            need: cols,
        });
    }
    if k_o.shape() != (m, n) || weights.q.nrows() != p || weights.r.nrows() != m {
        return Err(Error::Dimension("regressor gain or weight shapes".into()));
    }
    let rows = log.len();
    let mut rho = Mat::zeros(rows, cols);
    let mut data = Mat::zeros(rows, cols);
    let mut nu = Vector::zeros(rows);
    let mut row = vec![0.0; cols];
    let mut drow = vec![0.0; cols];
    for (i, s) in log.samples.iter().enumerate() {
        if s.zeta.len() != n || s.ubar.len() != m || s.theta.len() != p || s.y.len() != p {
            return Err(Error::Dimension(format!("sample at k = {} has inconsistent sizes", s.k)));
        }
        let kz = k_o * &s.zeta;
        let w = &s.ubar + &kz;
        let vz = linalg::vecv(s.zeta.as_slice());
        put(&mut row, layout.lp.start, &(linalg::vecv(s.zeta_next.as_slice()) - &vz));
        put(&mut row, layout.l1.start, &(w.kronecker(&s.zeta) * -2.0));
        put(
            &mut row,
            layout.l2.start,
            &(linalg::vecv(kz.as_slice()) - linalg::vecv(s.ubar.as_slice())),
        );
        put(&mut row, layout.l3.start, &(s.theta.kronecker(&s.zeta) * -2.0));
        put(&mut row, layout.l4.start, &(s.ubar.kronecker(&s.theta) * -2.0));
        put(&mut row, layout.l5.start, &(-linalg::vecv(s.theta.as_slice())));
        rho.row_mut(i).copy_from_slice(&row);
        nu[i] = -s.y.dot(&(&weights.q * &s.y)) - kz.dot(&(&weights.r * &kz));

        put(&mut drow, layout.lp.start, &vz);
        put(&mut drow, layout.l1.start, &s.ubar.kronecker(&s.zeta));
        put(&mut drow, layout.l2.start, &linalg::vecv(s.ubar.as_slice()));
        put(&mut drow, layout.l3.start, &s.theta.kronecker(&s.zeta));
        put(&mut drow, layout.l4.start, &s.ubar.kronecker(&s.theta));
        put(&mut drow, layout.l5.start, &linalg::vecv(s.theta.as_slice()));
        data.row_mut(i).copy_from_slice(&drow);
    }
    Ok(RegressorSystem {
        rho,
        nu,
        layout,
        data,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankCheck {
    pub rank: usize,
    pub required: usize,
    pub ok: bool,
}

pub fn check_rank_condition(reg: &RegressorSystem) -> RankCheck {
    let required = reg.layout.n_cols();
    let rank = linalg::rank(&reg.data);
    RankCheck {
        rank,
        required,
        ok: rank == required,
    }
}

/// Largest absolute row residual `|rho v - nu|`.
pub fn max_row_residual(reg: &RegressorSystem, v: &Vector) -> f64 {
    (&reg.rho * v - &reg.nu).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::behavior::Sample;

    #[test]
    fn layout_counts() {
        let l = KernelLayout::new(12, 1, 1);
        assert_eq!(l.n_cols(), 78 + 12 + 1 + 12 + 1 + 1);
        assert_eq!(l.n_cols(), 105);
        let l = KernelLayout::new(3, 2, 2);
        assert_eq!(l.n_cols(), 6 + 6 + 3 + 6 + 4 + 3);
    }

    #[test]
    fn pack_round_trip() {
        let layout = KernelLayout::new(3, 2, 1);
        let v = Vector::from_fn(layout.n_cols(), |i, _| i as f64 + 1.0);
        let k = LearnedKernels::unpack(&v, &layout).unwrap();
        assert_eq!(k.pack(&layout).unwrap(), v);
        assert_eq!(k.l1[(1, 0)], v[layout.l1.start + 1]);
        assert_eq!(k.l1[(0, 1)], v[layout.l1.start + 3]);
    }

    fn zero_log(n: usize, rows: usize) -> DataLog {
        DataLog {
            samples: (0..rows)
                .map(|k| Sample {
                    k,
                    zeta: Vector::zeros(n),
                    zeta_next: Vector::zeros(n),
                    ubar: Vector::zeros(1),
                    theta: Vector::zeros(1),
                    y: Vector::zeros(1),
                    r: Vector::zeros(2),
                })
                .collect(),
        }
    }

    fn unit_weights() -> Weights {
        Weights::new(Mat::identity(1, 1), Mat::identity(1, 1)).unwrap()
    }

    #[test]
    fn zero_log_gives_zero_system() {
        let log = zero_log(3, 20);
        let reg = assemble_regressors(&log, &Mat::zeros(1, 3), &unit_weights()).unwrap();
        assert_eq!(reg.rho, Mat::zeros(20, reg.layout.n_cols()));
        assert_eq!(reg.nu, Vector::zeros(20));
        let rc = check_rank_condition(&reg);
        assert_eq!(rc.rank, 0);
        assert!(!rc.ok);
    }

    #[test]
    fn too_few_samples() {
        let log = zero_log(3, 5);
        assert!(matches!(
            assemble_regressors(&log, &Mat::zeros(1, 3), &unit_weights()),
            Err(Error::InsufficientSamples { have: 5, .. })
        ));
    }

    #[test]
    fn vec_and_quadratic_forms_agree() {
        // zeta' L1 w equals kron(w, zeta) . vec(L1) under column-major vec.
        let zeta = Vector::from_vec(vec![0.3, -1.0, 2.0]);
        let w = Vector::from_vec(vec![1.5, -0.5]);
        let l1 = Mat::from_fn(3, 2, |i, j| (i * 2 + j) as f64 - 2.5);
        let lhs = zeta.dot(&(&l1 * &w));
        let rhs = w.kronecker(&zeta).dot(&linalg::vec(&l1));
        assert!((lhs - rhs).abs() < 1e-14);
        // theta' L4 ubar with L4 r_p x r_m.
        let theta = Vector::from_vec(vec![0.7]);
        let l4 = Mat::from_row_slice(1, 2, &[2.0, -3.0]);
        let lhs = theta.dot(&(&l4 * &w));
        let rhs = w.kronecker(&theta).dot(&linalg::vec(&l4));
        assert!((lhs - rhs).abs() < 1e-14);
    }
}
