use std::f64::consts::PI;

/// Real roots of a cubic polynomial.
#[derive(Debug, Clone, PartialEq)]
pub enum CubicRoots {
    /// Distinct real roots in ascending order (possibly empty).
    Roots(Vec<f64>),
    /// Every coefficient is zero; every point is a root.
    IdenticallyZero,
}

impl CubicRoots {
    pub fn roots(&self) -> &[f64] {
        match self {
            CubicRoots::Roots(r) => r,
            CubicRoots::IdenticallyZero => &[],
        }
    }
}

const VANISHING: f64 = 1e-12;

/// Real roots of `c3 d^3 + c2 d^2 + c1 d + c0`.
///
/// Leading coefficients below `1e-12 * max|c|` are treated as zero, degrading
/// to the quadratic, linear or constant case.
pub fn cubic_real_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> CubicRoots {
    let scale = c3.abs().max(c2.abs()).max(c1.abs()).max(c0.abs());
    if scale == 0.0 {
        return CubicRoots::IdenticallyZero;
    }
    let tol = VANISHING * scale;
    let mut roots = if c3.abs() > tol {
        depressed_cubic(c2 / c3, c1 / c3, c0 / c3)
    } else if c2.abs() > tol {
        quadratic(c2, c1, c0)
    } else if c1.abs() > tol {
        vec![-c0 / c1]
    } else {
        Vec::new()
    };
    let eval = |x: f64| ((c3 * x + c2) * x + c1) * x + c0;
    let deriv = |x: f64| (3.0 * c3 * x + 2.0 * c2) * x + c1;
    for r in roots.iter_mut() {
        // a couple of guarded Newton steps polish the closed-form values
        for _ in 0..3 {
            let f = eval(*r);
            let df = deriv(*r);
            if f == 0.0 || df == 0.0 {
                break;
            }
            let cand = *r - f / df;
            if cand.is_finite() && eval(cand).abs() < f.abs() {
                *r = cand;
            } else {
                break;
            }
        }
    }
    roots.retain(|r| r.is_finite());
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0));
    CubicRoots::Roots(roots)
}

fn quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        return vec![-b / (2.0 * a)];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        // b == 0 and c == 0
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Roots of the monic cubic `x^3 + a x^2 + b x + c`.
fn depressed_cubic(a: f64, b: f64, c: f64) -> Vec<f64> {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;
    if p == 0.0 && q == 0.0 {
        return vec![-shift];
    }
    if disc > 0.0 {
        // one real root
        let sq = disc.sqrt();
        let u = (-half_q - half_q.signum() * sq).cbrt();
        let t = if u == 0.0 { 0.0 } else { u - third_p / u };
        vec![t - shift]
    } else {
        // three real roots (two coincide when disc == 0)
        let r = (-third_p).sqrt();
        let arg = (-half_q / (r * r * r)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| 2.0 * r * (theta - 2.0 * PI * k as f64 / 3.0).cos() - shift)
            .collect()
    }
}
