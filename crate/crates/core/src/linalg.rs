//! Dense linear-algebra substrate.
//!
//! Thin layer over `nalgebra` providing the half-vectorization maps used by
//! the Bellman regressors, SVD-based numerical rank, Stein and Sylvester
//! solvers, minimum-norm least squares and PBH rank tests.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type Cplx = Complex<f64>;

/// Default relative tolerance for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Minimum eigenvalue a symmetric matrix must exceed to count as positive definite.
pub const PD_TOL: f64 = 1e-12;

fn ensure_square(m: &Mat) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn symmetrize(w: &Mat) -> Mat {
    (w + w.transpose()) * 0.5
}

/// Number of free entries of an `n x n` symmetric matrix.
pub fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// `[W11, 2W12, .., 2W1n, W22, 2W23, .., Wnn]`. The input is symmetrized first.
pub fn vecs(w: &Mat) -> Result<Vector> {
    let n = ensure_square(w)?;
    let w = symmetrize(w);
    let mut out = Vec::with_capacity(tri_len(n));
    for i in 0..n {
        out.push(w[(i, i)]);
        for j in i + 1..n {
            out.push(2.0 * w[(i, j)]);
        }
    }
    Ok(Vector::from_vec(out))
}

/// Inverse of [`vecs`].
pub fn unvecs(v: &[f64], n: usize) -> Result<Mat> {
    if v.len() != tri_len(n) {
        return Err(Error::Dimension(format!(
            "unvecs expects {} entries for n = {n}, got {}",
            tri_len(n),
            v.len()
        )));
    }
    let mut w = Mat::zeros(n, n);
    let mut idx = 0;
    for i in 0..n {
        w[(i, i)] = v[idx];
        idx += 1;
        for j in i + 1..n {
            w[(i, j)] = 0.5 * v[idx];
            w[(j, i)] = 0.5 * v[idx];
            idx += 1;
        }
    }
    Ok(w)
}

/// `[t1^2, t1 t2, .., t1 tn, t2^2, .., tn^2]`, so that `vecv(t) . vecs(W) = t' W t`.
pub fn vecv(t: &[f64]) -> Vector {
    let n = t.len();
    let mut out = Vec::with_capacity(tri_len(n));
    for i in 0..n {
        for j in i..n {
            out.push(t[i] * t[j]);
        }
    }
    Vector::from_vec(out)
}

/// Column-major vectorization.
pub fn vec(m: &Mat) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<Mat> {
    if v.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "unvec expects {} entries for {rows}x{cols}, got {}",
            rows * cols,
            v.len()
        )));
    }
    Ok(Mat::from_column_slice(rows, cols, v))
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn singular_values(m: &Mat) -> Vector {
    if m.is_empty() {
        return Vector::zeros(0);
    }
    SVD::new(m.clone(), false, false).singular_values
}

/// Number of singular values above `tol * max(rows, cols) * sigma_max`.
pub fn svd_rank(m: &Mat, tol: f64) -> usize {
    let sv = singular_values(m);
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let threshold = tol * m.nrows().max(m.ncols()) as f64 * smax;
    sv.iter().filter(|&&s| s > threshold).count()
}

pub fn rank(m: &Mat) -> usize {
    svd_rank(m, RANK_TOL)
}

/// Minimum-norm least-squares solution of `a x = b`, discarding singular values
/// below the [`svd_rank`] threshold.
pub fn solve_linear_least_squares(a: &Mat, b: &Vector) -> Result<Vector> {
    lstsq_with_tol(a, b, RANK_TOL)
}

pub fn lstsq_with_tol(a: &Mat, b: &Vector, tol: f64) -> Result<Vector> {
    if a.nrows() != b.len() {
        return Err(Error::Dimension(format!(
            "least squares: matrix has {} rows, rhs has {}",
            a.nrows(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Ok(Vector::zeros(a.ncols()));
    }
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return Ok(Vector::zeros(a.ncols()));
    }
    let threshold = tol * a.nrows().max(a.ncols()) as f64 * smax;
    svd.solve(b, threshold)
        .map_err(|_| Error::Singular("least squares"))
}

pub fn eigenvalues(m: &Mat) -> Result<Vec<Cplx>> {
    ensure_square(m)?;
    if m.is_empty() {
        return Ok(Vec::new());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalue input"));
    }
    Ok(m.complex_eigenvalues().iter().cloned().collect())
}

pub fn spectral_radius(m: &Mat) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|l| l.norm())
        .fold(0.0_f64, f64::max))
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_sym_eigenvalue(m: &Mat) -> Result<f64> {
    ensure_square(m)?;
    if m.is_empty() {
        return Ok(f64::INFINITY);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}

pub fn max_sym_eigenvalue(m: &Mat) -> Result<f64> {
    ensure_square(m)?;
    if m.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    Ok(eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn is_positive_definite(m: &Mat) -> Result<bool> {
    Ok(min_sym_eigenvalue(m)? > PD_TOL)
}

/// Solves `P - Acl' P Acl = Qrhs` through the Kronecker form
/// `(I - Acl' (x) Acl') vec(P) = vec(Qrhs)`.
pub fn solve_stein(acl: &Mat, qrhs: &Mat) -> Result<Mat> {
    let n = ensure_square(acl)?;
    if qrhs.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "stein: Acl is {n}x{n}, rhs is {}x{}",
            qrhs.nrows(),
            qrhs.ncols()
        )));
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let rho = spectral_radius(acl)?;
    if rho >= 1.0 {
        return Err(Error::NotSchur {
            spectral_radius: rho,
        });
    }
    let at = acl.transpose();
    let lu = (Mat::identity(n * n, n * n) - kron(&at, &at)).lu();
    let solve = |rhs: &Mat| -> Result<Mat> {
        let sol = lu.solve(&vec(rhs)).ok_or(Error::Singular("stein equation"))?;
        Ok(Mat::from_column_slice(n, n, sol.as_slice()))
    };
    let mut p = symmetrize(&solve(qrhs)?);
    // Iterative refinement against the n x n residual.
    for _ in 0..STEIN_REFINEMENT_STEPS {
        let res = symmetrize(&(qrhs - &p + &at * &p * acl));
        if res.norm() <= f64::EPSILON * p.norm() {
            break;
        }
        p = symmetrize(&(p + solve(&res)?));
    }
    Ok(p)
}

const STEIN_REFINEMENT_STEPS: usize = 3;

/// Solves `A X - X B = C` by vectorization.
pub fn solve_sylvester(a: &Mat, b: &Mat, c: &Mat) -> Result<Mat> {
    let n = ensure_square(a)?;
    let m = ensure_square(b)?;
    if c.shape() != (n, m) {
        return Err(Error::Dimension(format!(
            "sylvester: expected rhs {n}x{m}, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    let lhs = kron(&Mat::identity(m, m), a) - kron(&b.transpose(), &Mat::identity(n, n));
    let sol = lhs
        .lu()
        .solve(&vec(c))
        .ok_or(Error::Singular("sylvester equation"))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("sylvester equation"));
    }
    Ok(Mat::from_column_slice(n, m, sol.as_slice()))
}

/// Rank of the complex matrix `re + i im`, computed from the real embedding
/// `[[re, -im], [im, re]]` whose real rank is twice the complex rank.
pub fn complex_rank(re: &Mat, im: &Mat, tol: f64) -> Result<usize> {
    if re.shape() != im.shape() {
        return Err(Error::Dimension(
            "complex rank: real and imaginary parts differ in shape".into(),
        ));
    }
    let (r, c) = re.shape();
    let mut emb = Mat::zeros(2 * r, 2 * c);
    emb.view_mut((0, 0), (r, c)).copy_from(re);
    emb.view_mut((0, c), (r, c)).copy_from(&(-im));
    emb.view_mut((r, 0), (r, c)).copy_from(im);
    emb.view_mut((r, c), (r, c)).copy_from(re);
    Ok(svd_rank(&emb, tol) / 2)
}

/// Complex rank of `[A - lambda I, Bcols]`.
pub fn pbh_rank_test(a: &Mat, bcols: &Mat, lambda: Cplx) -> Result<usize> {
    let n = ensure_square(a)?;
    if bcols.nrows() != n {
        return Err(Error::Dimension(format!(
            "pbh: A is {n}x{n}, B has {} rows",
            bcols.nrows()
        )));
    }
    let m = bcols.ncols();
    let mut re = Mat::zeros(n, n + m);
    let mut im = Mat::zeros(n, n + m);
    re.view_mut((0, 0), (n, n))
        .copy_from(&(a - Mat::identity(n, n) * lambda.re));
    re.view_mut((0, n), (n, m)).copy_from(bcols);
    im.view_mut((0, 0), (n, n))
        .copy_from(&(-Mat::identity(n, n) * lambda.im));
    complex_rank(&re, &im, RANK_TOL)
}

/// `[B, AB, .., A^{n-1} B]`.
pub fn ctrb(a: &Mat, b: &Mat) -> Mat {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = Mat::zeros(n, n * m);
    let mut blk = b.clone();
    for i in 0..n {
        out.view_mut((0, i * m), (n, m)).copy_from(&blk);
        blk = a * blk;
    }
    out
}

/// `[C; CA; ..; CA^{n-1}]`.
pub fn obsv(a: &Mat, c: &Mat) -> Mat {
    ctrb(&a.transpose(), &c.transpose()).transpose()
}

pub fn is_controllable(a: &Mat, b: &Mat) -> bool {
    rank(&ctrb(a, b)) == a.nrows()
}

pub fn is_observable(a: &Mat, c: &Mat) -> bool {
    rank(&obsv(a, c)) == a.nrows()
}

/// Companion matrix of `z^n + d1 z^{n-1} + .. + dn`: ones on the superdiagonal,
/// last row `[-dn, .., -d1]`.
pub fn companion(d: &[f64]) -> Mat {
    let n = d.len();
    let mut a = Mat::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -d[n - 1 - j];
    }
    a
}

/// Faddeev-LeVerrier: returns `(d, adj)` with
/// `det(zI - A) = z^n + d[0] z^{n-1} + .. + d[n-1]` and
/// `adj(zI - A) = adj[0] z^{n-1} + .. + adj[n-1]`.
pub fn faddeev_leverrier(a: &Mat) -> Result<(Vec<f64>, Vec<Mat>)> {
    let n = ensure_square(a)?;
    let mut d = Vec::with_capacity(n);
    let mut adj = Vec::with_capacity(n);
    let mut b = Mat::identity(n, n);
    for i in 1..=n {
        adj.push(b.clone());
        let ab = a * &b;
        let di = -ab.trace() / i as f64;
        d.push(di);
        b = ab + Mat::identity(n, n) * di;
    }
    Ok((d, adj))
}

/// Evaluates the polynomial with descending coefficients `coeffs` at a square matrix.
pub fn poly_eval_matrix(coeffs: &[f64], s: &Mat) -> Result<Mat> {
    let n = ensure_square(s)?;
    let mut acc = Mat::zeros(n, n);
    for &c in coeffs {
        acc = &acc * s + Mat::identity(n, n) * c;
    }
    Ok(acc)
}

/// Builds a matrix from nested rows. All rows must share a length.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entries"));
    }
    Ok(Mat::from_row_slice(r, c, &flat))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

pub fn block_diag(blocks: &[Mat]) -> Mat {
    let rows: usize = blocks.iter().map(Mat::nrows).sum();
    let cols: usize = blocks.iter().map(Mat::ncols).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r0, c0), b.shape()).copy_from(b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(m: &Mat, what: &'static str) -> Result<Mat> {
    let min = min_sym_eigenvalue(m)?;
    if min <= PD_TOL {
        return Err(Error::NotPositiveDefinite {
            what,
            min_eigenvalue: min,
        });
    }
    symmetrize(m)
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::NotPositiveDefinite {
            what,
            min_eigenvalue: min,
        })
}
