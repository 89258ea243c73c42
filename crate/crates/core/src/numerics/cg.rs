use crate::{Error, Result};

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `|A x - b| / |b|` at exit (0 when `b = 0`).
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` for symmetric positive semidefinite `A` given only as an
/// operator, starting from zero.
pub fn cg_solve<F>(apply: F, b: &[f64], tol: f64, max_iter: usize) -> Result<CgOutcome>
where
    F: FnMut(&[f64], &mut [f64]),
{
    cg_solve_from(apply, b, None, tol, max_iter)
}

/// Conjugate gradient with an optional warm start.
///
/// Stops once `|A x - b| <= tol * |b|` or after `max_iter` iterations; the last
/// iterate is returned either way with `converged` set accordingly.
pub fn cg_solve_from<F>(
    mut apply: F,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "conjugate gradient: right-hand side is not finite".into(),
        ));
    }
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let mut x = match x0 {
        Some(x0) => {
            assert_eq!(x0.len(), n, "warm start has the wrong length");
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut ap = vec![0.0; n];
    let mut r = b.to_vec();
    if x0.is_some() {
        apply(&x, &mut ap);
        for (ri, a) in r.iter_mut().zip(&ap) {
            *ri -= a;
        }
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = tol * b_norm;
    let mut iterations = 0;
    while rr.sqrt() > target && iterations < max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() {
            return Err(Error::Numeric(
                "conjugate gradient: operator produced non-finite values".into(),
            ));
        }
        if pap <= 0.0 {
            // direction in the null space of a semidefinite operator
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        iterations += 1;
    }
    if !rr.is_finite() {
        return Err(Error::Numeric(
            "conjugate gradient: residual is not finite".into(),
        ));
    }
    let relative_residual = rr.sqrt() / b_norm;
    Ok(CgOutcome {
        x,
        iterations,
        relative_residual,
        converged: relative_residual <= tol,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
