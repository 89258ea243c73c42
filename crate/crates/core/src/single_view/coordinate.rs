use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{model_covariance, Dictionary, GridModel};
use crate::numerics::{cdot, cubic_real_roots, herm_matvec, CMatrix, CubicRoots, HermitianInverse};
use crate::{Error, Result};

/// Scalars defining the one-dimensional objective in the increment `d` of one intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateTerms {
    /// `gamma_beta v^H Sigma^-1 v`
    pub a: f64,
    /// `gamma_beta v^H Sigma^-1 S_hat Sigma^-1 v`
    pub b: f64,
    /// `eta |N_q| gamma_beta^2`
    pub c: f64,
    /// `eta gamma_beta sum_{q' in N_q} (s_q - s_q')`
    pub e: f64,
    /// `eta/2 sum_{q' in N_q} (s_q - s_q')^2`, the penalty at `d = 0`.
    pub penalty0: f64,
}

/// Objective change `f(d)` of the penalized cost when intensity `q` moves by `d`.
pub fn coordinate_objective(t: &CoordinateTerms, d: f64) -> f64 {
    let one = 1.0 + d * t.a;
    if one <= 0.0 {
        return f64::INFINITY;
    }
    // eta/2 sum (d gb + diff)^2 = penalty0 + d e + d^2 c / 2
    let pen = t.penalty0 + d * t.e + 0.5 * d * d * t.c;
    one.ln() - d * t.b / one + pen
}

fn terms_from(a_raw: f64, b_raw: f64, grid: &GridModel, q: usize, eta: f64) -> CoordinateTerms {
    let gb = grid.gamma_beta[q];
    let sq = grid.gamma_r[q] * gb;
    let nb = grid.neighbors(q);
    let mut sum_diff = 0.0;
    let mut sum_sq = 0.0;
    for &j in nb {
        let diff = sq - grid.gamma_r[j] * grid.gamma_beta[j];
        sum_diff += diff;
        sum_sq += diff * diff;
    }
    CoordinateTerms {
        a: gb * a_raw,
        b: gb * b_raw,
        c: eta * nb.len() as f64 * gb * gb,
        e: eta * gb * sum_diff,
        penalty0: 0.5 * eta * sum_sq,
    }
}

/// Computes the coordinate terms for grid point `q`, also returning `Sigma^-1 v`.
pub fn coordinate_terms(
    grid: &GridModel,
    dict: &Dictionary,
    inv: &HermitianInverse,
    shat: &CMatrix,
    q: usize,
    eta: f64,
) -> (CoordinateTerms, Vec<Complex64>) {
    let v = dict.column(q);
    let n = v.len();
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    inv.apply(v, &mut w);
    let mut sw = vec![Complex64::new(0.0, 0.0); n];
    herm_matvec(shat, &w, &mut sw);
    let a_raw = cdot(v, &w).re;
    let b_raw = cdot(&w, &sw).re;
    (terms_from(a_raw, b_raw, grid, q, eta), w)
}

/// Minimiser of `f` over `[-gamma, 1 - gamma]`, comparing stationary points,
/// both endpoints and the current value `d = 0`.
fn best_increment(t: &CoordinateTerms, gamma: f64) -> f64 {
    let d0 = if t.a > 0.0 {
        -1.0 / t.a
    } else {
        f64::NEG_INFINITY
    };
    let lo = (-gamma).max(d0);
    let hi = 1.0 - gamma;
    let mut candidates = vec![0.0, lo, hi];
    let c3 = t.a * t.a * t.c;
    let c2 = 2.0 * t.a * t.c + t.a * t.a * t.e;
    let c1 = t.a * t.a + t.c + 2.0 * t.a * t.e;
    let c0 = t.a - t.b + t.e;
    match cubic_real_roots(c3, c2, c1, c0) {
        CubicRoots::Roots(r) => candidates.extend(r.into_iter().filter(|d| *d >= lo && *d <= hi)),
        CubicRoots::IdenticallyZero => {}
    }
    let mut best = 0.0;
    let mut best_val = coordinate_objective(t, 0.0);
    for d in candidates {
        let val = coordinate_objective(t, d);
        if val < best_val {
            best = d;
            best_val = val;
        }
    }
    // stay strictly inside the domain of the log term
    if 1.0 + best * t.a <= 1e-12 {
        best = d0 * (1.0 - 1e-10);
    }
    best
}

/// Exact minimisation of the penalized cost over intensity `q`; updates the
/// grid and the maintained inverse. Returns the applied increment.
pub fn coordinate_step(
    grid: &mut GridModel,
    dict: &Dictionary,
    inv: &mut HermitianInverse,
    shat: &CMatrix,
    noise_variance: f64,
    q: usize,
    eta: f64,
) -> Result<f64> {
    let (terms, w) = coordinate_terms(grid, dict, inv, shat, q, eta);
    let gamma = grid.gamma_r[q];
    let d = best_increment(&terms, gamma);
    if d == 0.0 {
        return Ok(0.0);
    }
    grid.gamma_r[q] = (gamma + d).clamp(0.0, 1.0);
    let applied = grid.gamma_r[q] - gamma;
    match inv.rank1_update_with(dict.column(q), &w, applied * grid.gamma_beta[q]) {
        Ok(()) => Ok(applied),
        Err(Error::SingularUpdate { .. }) => {
            // round-off pushed the downdate past feasibility: rebuild directly
            inv.reset(model_covariance(grid, dict, noise_variance))?;
            Ok(applied)
        }
        Err(e) => Err(e),
    }
}

/// `iter1` passes of coordinate descent, each over a random subset (or all) of the indices.
#[allow(clippy::too_many_arguments)]
pub fn intensity_sweep<R: Rng + ?Sized>(
    grid: &mut GridModel,
    dict: &Dictionary,
    inv: &mut HermitianInverse,
    shat: &CMatrix,
    noise_variance: f64,
    eta: f64,
    iter1: usize,
    subset_size: Option<usize>,
    rng: &mut R,
) -> Result<()> {
    let mut order: Vec<usize> = (0..grid.len()).collect();
    for _ in 0..iter1 {
        order.shuffle(rng);
        let take = subset_size.unwrap_or(order.len()).min(order.len());
        for &q in &order[..take] {
            coordinate_step(grid, dict, inv, shat, noise_variance, q, eta)?;
        }
    }
    Ok(())
}
