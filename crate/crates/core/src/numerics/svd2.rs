/// Eigen-decomposition of a real symmetric 2x2 matrix, `lambda1 >= lambda2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen2 {
    pub lambda1: f64,
    pub lambda2: f64,
    pub f1: [f64; 2],
    pub f2: [f64; 2],
}

/// Closed-form decomposition of `[[j[0][0], j[0][1]], [j[1][0], j[1][1]]]`.
///
/// The off-diagonal entries are averaged, so a slightly asymmetric input is
/// treated as its symmetric part. Isotropic inputs return the canonical axes.
pub fn svd2(j: [[f64; 2]; 2]) -> SymEigen2 {
    let a = j[0][0];
    let b = 0.5 * (j[0][1] + j[1][0]);
    let c = j[1][1];
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let radius = half_diff.hypot(b);
    if radius == 0.0 {
        return SymEigen2 {
            lambda1: mean,
            lambda2: mean,
            f1: [1.0, 0.0],
            f2: [0.0, 1.0],
        };
    }
    let theta = 0.5 * (2.0 * b).atan2(a - c);
    let (s, co) = theta.sin_cos();
    SymEigen2 {
        lambda1: mean + radius,
        lambda2: mean - radius,
        f1: [co, s],
        f2: [-s, co],
    }
}
