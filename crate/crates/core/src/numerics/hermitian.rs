use num_complex::Complex64;

use super::{add_outer, cdot, herm_matvec, CMatrix};
use crate::{Error, Result};

/// Number of rank-1 operations between direct re-inversions.
pub const DEFAULT_REFRESH_INTERVAL: usize = 500;

/// Inverse of a Hermitian positive-definite matrix maintained under rank-1
/// updates, together with the log-determinant of the matrix itself.
///
/// The accumulated matrix is tracked alongside so that the inverse can be
/// recomputed directly every `refresh_every` updates, bounding round-off drift.
#[derive(Debug, Clone)]
pub struct HermitianInverse {
    sigma: CMatrix,
    inv: CMatrix,
    logdet: f64,
    ops_since_refresh: usize,
    refresh_every: usize,
}

impl HermitianInverse {
    /// Inverse of `sigma2 * I`.
    pub fn scaled_identity(n: usize, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "identity scale must be positive, got {sigma2}"
            )));
        }
        Ok(HermitianInverse {
            sigma: CMatrix::from_diagonal_element(n, n, Complex64::new(sigma2, 0.0)),
            inv: CMatrix::from_diagonal_element(n, n, Complex64::new(1.0 / sigma2, 0.0)),
            logdet: n as f64 * sigma2.ln(),
            ops_since_refresh: 0,
            refresh_every: DEFAULT_REFRESH_INTERVAL,
        })
    }

    /// Directly inverts a Hermitian positive-definite matrix.
    pub fn from_matrix(sigma: CMatrix) -> Result<Self> {
        let (inv, logdet) = invert_hpd(&sigma)?;
        Ok(HermitianInverse {
            sigma,
            inv,
            logdet,
            ops_since_refresh: 0,
            refresh_every: DEFAULT_REFRESH_INTERVAL,
        })
    }

    pub fn with_refresh_interval(mut self, every: usize) -> Self {
        self.refresh_every = every.max(1);
        self
    }

    pub fn dim(&self) -> usize {
        self.inv.nrows()
    }

    pub fn inverse(&self) -> &CMatrix {
        &self.inv
    }

    /// The matrix whose inverse is maintained.
    pub fn matrix(&self) -> &CMatrix {
        &self.sigma
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// `out = inv * x`.
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        herm_matvec(&self.inv, x, out);
    }

    pub fn apply_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
        self.apply(x, &mut out);
        out
    }

    /// Replaces the maintained matrix by `matrix + s v v^H` (Sherman-Morrison).
    ///
    /// Fails without modifying the state when `1 + s v^H inv v <= 0`.
    pub fn rank1_update(&mut self, v: &[Complex64], s: f64) -> Result<()> {
        let w = self.apply_vec(v);
        self.rank1_update_with(v, &w, s)
    }

    /// Same as [`rank1_update`](Self::rank1_update) with `w = inv * v` supplied by the caller.
    pub fn rank1_update_with(&mut self, v: &[Complex64], w: &[Complex64], s: f64) -> Result<()> {
        if s == 0.0 {
            return Ok(());
        }
        let vhw = cdot(v, w).re;
        let denom = 1.0 + s * vhw;
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::SingularUpdate { denominator: denom });
        }
        add_outer(&mut self.inv, w, -s / denom);
        add_outer(&mut self.sigma, v, s);
        self.logdet += denom.ln();
        self.ops_since_refresh += 1;
        if self.ops_since_refresh >= self.refresh_every {
            self.refresh()?;
        }
        Ok(())
    }

    /// Non-mutating form of [`rank1_update`](Self::rank1_update).
    pub fn updated(&self, v: &[Complex64], s: f64) -> Result<Self> {
        let mut next = self.clone();
        next.rank1_update(v, s)?;
        Ok(next)
    }

    /// Replaces the maintained matrix, keeping the refresh interval.
    pub fn reset(&mut self, sigma: CMatrix) -> Result<()> {
        let (inv, logdet) = invert_hpd(&sigma)?;
        self.sigma = sigma;
        self.inv = inv;
        self.logdet = logdet;
        self.ops_since_refresh = 0;
        Ok(())
    }

    /// Recomputes the inverse and log-determinant from the accumulated matrix.
    pub fn refresh(&mut self) -> Result<()> {
        // keep the accumulated matrix exactly Hermitian before factorising
        let n = self.sigma.nrows();
        for j in 0..n {
            for i in 0..j {
                let avg = 0.5 * (self.sigma[(i, j)] + self.sigma[(j, i)].conj());
                self.sigma[(i, j)] = avg;
                self.sigma[(j, i)] = avg.conj();
            }
            let d = self.sigma[(j, j)].re;
            self.sigma[(j, j)] = Complex64::new(d, 0.0);
        }
        let (inv, logdet) = invert_hpd(&self.sigma)?;
        self.inv = inv;
        self.logdet = logdet;
        self.ops_since_refresh = 0;
        Ok(())
    }
}

fn invert_hpd(sigma: &CMatrix) -> Result<(CMatrix, f64)> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("matrix is not positive definite".into()))?;
    let logdet = {
        let l = chol.l_dirty();
        (0..n).map(|i| 2.0 * l[(i, i)].re.ln()).sum()
    };
    let mut inv = chol.inverse();
    // symmetrise away round-off so downstream Hermitian kernels stay exact
    for j in 0..n {
        for i in 0..j {
            let avg = 0.5 * (inv[(i, j)] + inv[(j, i)].conj());
            inv[(i, j)] = avg;
            inv[(j, i)] = avg.conj();
        }
        let d = inv[(j, j)].re;
        inv[(j, j)] = Complex64::new(d, 0.0);
    }
    Ok((inv, logdet))
}
