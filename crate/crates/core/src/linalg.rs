//! Dense complex linear algebra helpers on top of `nalgebra`.
//!
//! Everything here works on [`CMat`], a dynamically sized complex matrix.
//! The routines that need a spectral decomposition go through the complex
//! Schur form, which always exists and is triangular for complex input.

use nalgebra::{DMatrix, Schur, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Real matrix lifted to complex entries.
pub fn from_real(m: &RMat) -> CMat {
    m.map(|x| c(x, 0.0))
}

/// Row-major constructor from real values, mostly for tests and fixtures.
pub fn real_matrix(rows: usize, cols: usize, values: &[f64]) -> CMat {
    assert_eq!(values.len(), rows * cols);
    CMat::from_row_slice(rows, cols, &values.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>())
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Entrywise conjugate (no transpose).
pub fn conj(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

pub fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Block matrix assembly from a row-major grid of blocks. Empty blocks
/// (zero rows or columns) are allowed as long as the grid is consistent.
pub fn block(rows: &[&[&CMat]]) -> CMat {
    let heights: Vec<usize> = rows.iter().map(|r| r[0].nrows()).collect();
    let widths: Vec<usize> = rows[0].iter().map(|b| b.ncols()).collect();
    let mut out = zeros(heights.iter().sum(), widths.iter().sum());
    let mut r0 = 0;
    for (i, row) in rows.iter().enumerate() {
        let mut c0 = 0;
        for (j, b) in row.iter().enumerate() {
            debug_assert_eq!(b.nrows(), heights[i]);
            debug_assert_eq!(b.ncols(), widths[j]);
            out.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(*b);
            c0 += widths[j];
        }
        r0 += heights[i];
    }
    out
}

pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let za = zeros(a.nrows(), b.ncols());
    let zb = zeros(b.nrows(), a.ncols());
    block(&[&[a, &za], &[&zb, b]])
}

pub fn hcat(a: &CMat, b: &CMat) -> CMat {
    debug_assert_eq!(a.nrows(), b.nrows());
    block(&[&[a, b]])
}

pub fn vcat(a: &CMat, b: &CMat) -> CMat {
    debug_assert_eq!(a.ncols(), b.ncols());
    block(&[&[a], &[b]])
}

/// Complex Schur form `a = u * t * u^*` with `t` upper triangular.
pub fn schur(a: &CMat) -> Result<(CMat, CMat)> {
    if a.nrows() == 0 {
        return Ok((zeros(0, 0), zeros(0, 0)));
    }
    let n = a.nrows();
    let max_iter = 30 * n.max(10);
    let (u, mut t) = match Schur::try_new(a.clone(), f64::EPSILON, max_iter) {
        Some(s) => s.unpack(),
        None => {
            // the shifted QR iteration can stall on exactly symmetric spectra;
            // a fixed unitary similarity breaks the symmetry
            // defective eigenvalues (repeated poles) converge only linearly,
            // so the retries also allow more sweeps and a looser deflation test
            let mut out = None;
            for (seed, eps, iters) in [(1u64, f64::EPSILON, max_iter), (2, f64::EPSILON, 10 * max_iter), (3, 16.0 * f64::EPSILON, 30 * max_iter)] {
                let w = scrambler(n, seed);
                let b = w.adjoint() * a * &w;
                if let Some(s) = Schur::try_new(b, eps, iters) {
                    let (q, t) = s.unpack();
                    out = Some((w * q, t));
                    break;
                }
            }
            out.ok_or(Error::SchurFailed)?
        }
    };
    // clear the roundoff left below the diagonal
    for j in 0..t.ncols() {
        for i in (j + 1)..t.nrows() {
            t[(i, j)] = ZERO;
        }
    }
    Ok((u, t))
}

/// Deterministic unitary matrix from the QR factor of a pseudo-random one.
fn scrambler(n: usize, seed: u64) -> CMat {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let m = CMat::from_fn(n, n, |_, _| c(next(), next()));
    m.qr().q()
}

pub fn eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    let (_, t) = schur(a)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Largest real part over the spectrum; `-inf` for an empty matrix.
pub fn spectral_abscissa(a: &CMat) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = SVD::new(m.clone(), false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn sigma_max(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn spectral_norm(m: &CMat) -> f64 {
    sigma_max(m)
}

pub fn rank(m: &CMat, tol: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis of the column space, with singular values above `tol`.
pub fn orth(m: &CMat, tol: f64) -> CMat {
    if m.nrows() == 0 || m.ncols() == 0 {
        return zeros(m.nrows(), 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.unwrap();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();
    let mut out = zeros(m.nrows(), keep.len());
    for (k, &i) in keep.iter().enumerate() {
        out.set_column(k, &u.column(i));
    }
    out
}

/// Orthonormal basis of the null space of a real matrix, together with the
/// numerical rank used to decide it.
pub fn real_null_space(m: &RMat, tol: f64) -> (RMat, usize) {
    let n = m.ncols();
    if m.nrows() == 0 {
        return (RMat::identity(n, n), 0);
    }
    // tall: compress to the triangular factor, which has the same right
    // singular vectors; short: pad so the thin SVD returns a full basis
    let padded = if m.nrows() > n {
        m.clone().qr().r()
    } else if m.nrows() < n {
        let mut p = RMat::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.unwrap();
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let thresh = tol * smax.max(f64::MIN_POSITIVE);
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= thresh)
        .collect();
    let r = n - null.len();
    let mut out = RMat::zeros(n, null.len());
    for (k, &i) in null.iter().enumerate() {
        out.set_column(k, &vt.row(i).transpose());
    }
    (out, r)
}

/// Minimum-norm least-squares solution of `m x = rhs` for a real matrix,
/// with the numerical rank (relative threshold `tol`).
pub fn real_lstsq(m: &RMat, rhs: &nalgebra::DVector<f64>, tol: f64) -> (nalgebra::DVector<f64>, usize) {
    if m.ncols() == 0 {
        return (nalgebra::DVector::zeros(0), 0);
    }
    let svd = SVD::new(m.clone(), true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let thresh = tol * smax.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > thresh).count();
    let x = svd.solve(rhs, thresh).expect("svd computed with u and v");
    (x, rank)
}

/// Solve `a x = b` by LU, rejecting numerically singular `a`.
///
/// The pivot ratio of the LU factor is used as a cheap reciprocal condition
/// estimate.
pub fn lu_solve(a: &CMat, b: &CMat) -> Option<CMat> {
    let n = a.nrows();
    if n == 0 {
        return Some(zeros(0, b.ncols()));
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let p = u[(i, i)].norm();
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if hi.is_nan() || hi <= 0.0 || lo <= 1e3 * f64::EPSILON * hi {
        return None;
    }
    let x = lu.solve(b)?;
    if is_finite(&x) {
        Some(x)
    } else {
        None
    }
}

pub fn inverse(a: &CMat) -> Option<CMat> {
    lu_solve(a, &eye(a.nrows()))
}

pub fn det(a: &CMat) -> Complex64 {
    if a.nrows() == 0 {
        return ONE;
    }
    a.clone().lu().determinant()
}

/// Solve the Sylvester equation `a x + x b = rhs` (Bartels–Stewart on the
/// complex Schur forms of `a` and `b`).
pub fn solve_sylvester(a: &CMat, b: &CMat, rhs: &CMat) -> Result<CMat> {
    let (m, n) = (a.nrows(), b.nrows());
    if rhs.nrows() != m || rhs.ncols() != n || a.ncols() != m || b.ncols() != n {
        return Err(Error::DimensionMismatch("sylvester operands".into()));
    }
    if m == 0 || n == 0 {
        return Ok(zeros(m, n));
    }
    let (ua, ta) = schur(a)?;
    let (ub, tb) = schur(b)?;
    let ct = ua.adjoint() * rhs * &ub;
    let mut y = zeros(m, n);
    let scale = max_abs(&ta).max(max_abs(&tb)).max(1.0);
    for j in 0..n {
        let mut col = ct.column(j).into_owned();
        for k in 0..j {
            let t = tb[(k, j)];
            if t != ZERO {
                col -= y.column(k) * t;
            }
        }
        let shift = tb[(j, j)];
        // upper-triangular back substitution with (ta + shift I)
        for i in (0..m).rev() {
            let mut acc = col[i];
            for l in (i + 1)..m {
                acc -= ta[(i, l)] * col[l];
            }
            let d = ta[(i, i)] + shift;
            if d.norm() <= 1e-14 * scale {
                return Err(Error::NotStable(d.re));
            }
            col[i] = acc / d;
        }
        y.set_column(j, &col);
    }
    Ok(&ua * y * ub.adjoint())
}

/// Controllability Gramian style Lyapunov solve: `a p + p a^* + q = 0`.
pub fn solve_lyapunov(a: &CMat, q: &CMat) -> Result<CMat> {
    solve_sylvester(a, &a.adjoint(), &(-q))
}

/// Complex Givens rotation (LAPACK `zlartg` convention): returns `(c, s)`
/// with `[c s; -conj(s) c] [f; g] = [r; 0]`.
pub fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    if g == ZERO {
        return (1.0, ZERO);
    }
    if f == ZERO {
        return (0.0, g.conj() / g.norm());
    }
    let nf = f.norm();
    let ng = (f.norm_sqr() + g.norm_sqr()).sqrt();
    (nf / ng, (f / nf) * g.conj() / ng)
}

/// Swap the adjacent diagonal entries `k` and `k + 1` of an upper-triangular
/// Schur factor, updating the unitary basis so that `u t u^*` is preserved.
pub fn schur_swap(t: &mut CMat, u: &mut CMat, k: usize) {
    let n = t.nrows();
    let t11 = t[(k, k)];
    let t22 = t[(k + 1, k + 1)];
    let (cs, sn) = givens(t[(k, k + 1)], t22 - t11);
    for j in (k + 2)..n {
        let x = t[(k, j)];
        let y = t[(k + 1, j)];
        t[(k, j)] = x * cs + sn * y;
        t[(k + 1, j)] = y * cs - sn.conj() * x;
    }
    let snc = sn.conj();
    for i in 0..k {
        let x = t[(i, k)];
        let y = t[(i, k + 1)];
        t[(i, k)] = x * cs + snc * y;
        t[(i, k + 1)] = y * cs - sn * x;
    }
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    for i in 0..u.nrows() {
        let x = u[(i, k)];
        let y = u[(i, k + 1)];
        u[(i, k)] = x * cs + snc * y;
        u[(i, k + 1)] = y * cs - sn * x;
    }
}
