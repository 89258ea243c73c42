/// Stacked forward differences `D = [D_x; D_y]` on an `nx x ny` raster with
/// replicate boundary: the difference leaving the last column (row) is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TvOperator {
    pub nx: usize,
    pub ny: usize,
}

impl TvOperator {
    pub fn new(nx: usize, ny: usize) -> Self {
        TvOperator { nx, ny }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `D x`, length `2 nx ny` (x-differences first).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; 2 * n];
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let i = iy * self.nx + ix;
                if ix + 1 < self.nx {
                    out[i] = x[i + 1] - x[i];
                }
                if iy + 1 < self.ny {
                    out[n + i] = x[i + self.nx] - x[i];
                }
            }
        }
        out
    }

    /// `D^T y` for `y` of length `2 nx ny`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let i = iy * self.nx + ix;
                if ix + 1 < self.nx {
                    out[i + 1] += y[i];
                    out[i] -= y[i];
                }
                if iy + 1 < self.ny {
                    out[i + self.nx] += y[n + i];
                    out[i] -= y[n + i];
                }
            }
        }
        out
    }

    /// `D^T D x`.
    pub fn apply_normal(&self, x: &[f64]) -> Vec<f64> {
        self.apply_transpose(&self.apply(x))
    }
}
