//! Numeric kernels shared by both imaging phases.

mod cg;
mod cubic;
mod hermitian;
mod svd2;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub use cg::{cg_solve, cg_solve_from, CgOutcome};
pub use cubic::{cubic_real_roots, CubicRoots};
pub use hermitian::{HermitianInverse, DEFAULT_REFRESH_INTERVAL};
pub use svd2::{svd2, SymEigen2};

pub type CMatrix = DMatrix<Complex64>;

/// `out = A x` for a Hermitian `A`, computed as conjugated column dot products.
pub fn herm_matvec(a: &CMatrix, x: &[Complex64], out: &mut [Complex64]) {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    debug_assert_eq!(x.len(), n);
    let data = a.as_slice();
    for (i, o) in out.iter_mut().enumerate() {
        *o = cdot(&data[i * n..(i + 1) * n], x);
    }
}

/// Allocating variant of [`herm_matvec`].
pub fn herm_mul(a: &CMatrix, x: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
    herm_matvec(a, x, &mut out);
    out
}

/// `sum conj(a_i) * b_i`.
#[inline]
pub fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (u, v) in a.iter().zip(b) {
        re += u.re * v.re + u.im * v.im;
        im += u.re * v.im - u.im * v.re;
    }
    Complex64::new(re, im)
}

/// Squared Euclidean norm of a complex vector.
pub fn cnorm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum()
}

/// `tr(A B)` for square matrices of equal size.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `tr(A B)` when both matrices are Hermitian: `sum_ij conj(A_ij) B_ij`, real.
pub fn trace_product_hermitian(a: &CMatrix, b: &CMatrix) -> f64 {
    cdot(a.as_slice(), b.as_slice()).re
}

/// Frobenius norm of a complex matrix.
pub fn frobenius(a: &CMatrix) -> f64 {
    cnorm_sqr(a.as_slice()).sqrt()
}

/// Adds `s * v v^H` to `m`, keeping an exactly Hermitian input exactly Hermitian.
pub fn add_outer(m: &mut CMatrix, v: &[Complex64], s: f64) {
    let n = v.len();
    let data = m.as_mut_slice();
    for j in 0..n {
        let cj = v[j].conj();
        let col = &mut data[j * n..(j + 1) * n];
        for (c, vi) in col.iter_mut().zip(v) {
            *c += (vi * cj) * s;
        }
    }
}

/// Natural log-determinant of a Hermitian positive-definite matrix via Cholesky.
pub fn logdet_hpd(a: &CMatrix) -> Option<f64> {
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    Some((0..a.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}
