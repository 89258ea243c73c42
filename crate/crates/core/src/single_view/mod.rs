//! Single-view imaging: penalized maximum-likelihood fitting of one
//! receiver's sample covariance over a grid whose points may move.
//!
//! The model covariance is `V diag(gamma_r * gamma_beta) V^H + noise * I`
//! where column `q` of `V` is the virtual-array response of grid point `q`.
//! Intensities are updated by exact coordinate minimisation (a cubic in the
//! increment); positions of the active grid points by projected gradient
//! descent with Armijo backtracking.

mod coordinate;
mod driver;
mod grid;
mod io;
mod position;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::{path_loss, Point, Scene};
use crate::numerics::{add_outer, CMatrix, HermitianInverse};
use crate::signal::{array_column, Pilot};
use crate::{Error, Result};

pub use coordinate::{
    coordinate_objective, coordinate_step, coordinate_terms, intensity_sweep, CoordinateTerms,
};
pub use driver::{run_phase1, Phase1Result, TraceEntry, TraceStage};
pub use grid::GridModel;
pub use io::{read_phase1, write_phase1, Phase1Meta};
pub use position::{
    penalty_position_gradient, position_gradient, position_sweep, project_position,
    PositionSweepReport,
};

/// Armijo backtracking parameters for the position update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmijoConfig {
    /// Largest single-coordinate move of the first trial step, meters.
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoConfig {
    fn default() -> Self {
        ArmijoConfig {
            initial_step: 0.1,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 20,
        }
    }
}

/// Settings of one single-view run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Phase1Config {
    /// Number of grid points; must be a perfect square.
    pub q: usize,
    /// Cluster penalty weight. `None` selects `eta_scale / mean(gamma_beta)^2`.
    pub eta: Option<f64>,
    pub eta_scale: f64,
    pub optimize_positions: bool,
    pub eps1: f64,
    pub eps2: f64,
    pub iter_max: usize,
    pub iter1: usize,
    pub iter2: usize,
    /// Coordinates visited per intensity pass; `None` visits all of them.
    pub subset_size: Option<usize>,
    pub armijo: ArmijoConfig,
    /// Move radius as a fraction of the initial grid spacing.
    pub d_max_factor: f64,
    pub active_threshold: f64,
    pub refresh_interval: usize,
    /// Record the penalized cost after every sweep and accepted step.
    pub record_trace: bool,
}

impl Default for Phase1Config {
    fn default() -> Self {
        Phase1Config {
            q: 400,
            eta: None,
            eta_scale: 1e3,
            optimize_positions: true,
            eps1: 1e-4,
            eps2: 1e-3,
            iter_max: 30,
            iter1: 2,
            iter2: 3,
            subset_size: None,
            armijo: ArmijoConfig::default(),
            d_max_factor: 0.6,
            active_threshold: 1e-6,
            refresh_interval: crate::numerics::DEFAULT_REFRESH_INTERVAL,
            record_trace: false,
        }
    }
}

impl Phase1Config {
    pub fn validate(&self) -> Result<()> {
        let side = (self.q as f64).sqrt().round() as usize;
        if self.q == 0 || side * side != self.q {
            return Err(Error::Config(format!(
                "grid size q = {} is not a perfect square",
                self.q
            )));
        }
        if let Some(eta) = self.eta {
            if !(eta >= 0.0) {
                return Err(Error::Config("eta must be nonnegative".into()));
            }
        }
        let a = &self.armijo;
        if !(a.initial_step > 0.0
            && a.shrink > 0.0
            && a.shrink < 1.0
            && a.sufficient_decrease > 0.0)
        {
            return Err(Error::Config("invalid Armijo parameters".into()));
        }
        if !(self.d_max_factor > 0.0
            && self.eps1 >= 0.0
            && self.eps2 >= 0.0
            && self.eta_scale >= 0.0)
        {
            return Err(Error::Config("invalid single-view tolerances".into()));
        }
        if self.subset_size == Some(0) || self.refresh_interval == 0 {
            return Err(Error::Config(
                "subset size and refresh interval must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Penalty weight for a grid.
    pub fn resolve_eta(&self, grid: &GridModel) -> f64 {
        self.eta.unwrap_or_else(|| {
            let mean = grid.gamma_beta.iter().sum::<f64>() / grid.len() as f64;
            self.eta_scale / (mean * mean)
        })
    }
}

/// Everything a single-view run needs besides the grid itself.
#[derive(Debug, Clone, Copy)]
pub struct Phase1Problem<'a> {
    pub scene: &'a Scene,
    pub pilot: &'a Pilot,
    pub k: usize,
    pub noise_variance: f64,
    pub shat: &'a CMatrix,
}

impl<'a> Phase1Problem<'a> {
    pub fn new(
        scene: &'a Scene,
        pilot: &'a Pilot,
        k: usize,
        noise_variance: f64,
        shat: &'a CMatrix,
    ) -> Result<Self> {
        if k >= scene.num_receivers() {
            return Err(Error::InvalidArgument(format!(
                "receiver {k} does not exist"
            )));
        }
        let n = pilot.len() * scene.rxs[k].num_antennas;
        if shat.shape() != (n, n) {
            return Err(Error::InvalidArgument(format!(
                "sample covariance is {:?}, expected {n} x {n}",
                shat.shape()
            )));
        }
        if !(noise_variance > 0.0) {
            return Err(Error::InvalidArgument(
                "noise variance must be positive".into(),
            ));
        }
        Ok(Phase1Problem {
            scene,
            pilot,
            k,
            noise_variance,
            shat,
        })
    }

    pub fn dim(&self) -> usize {
        self.shat.nrows()
    }

    pub fn n_rx(&self) -> usize {
        self.scene.rxs[self.k].num_antennas
    }

    pub fn column(&self, p: Point) -> Result<Vec<Complex64>> {
        array_column(self.scene, self.pilot, self.k, p)
    }

    pub fn path_loss(&self, p: Point) -> Result<f64> {
        path_loss(
            self.scene.tx.position,
            self.scene.rxs[self.k].position,
            p,
            self.scene.beta0_sq,
        )
    }
}

/// Dictionary columns of a grid, stored as an `N x Q` column-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub columns: CMatrix,
}

impl Dictionary {
    pub fn build(problem: &Phase1Problem, grid: &GridModel) -> Result<Self> {
        let n = problem.dim();
        let mut columns = CMatrix::zeros(n, grid.len());
        for (q, &p) in grid.positions.iter().enumerate() {
            let v = problem.column(p)?;
            columns.column_mut(q).copy_from_slice(&v);
        }
        Ok(Dictionary { columns })
    }

    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, q: usize) -> &[Complex64] {
        let n = self.columns.nrows();
        &self.columns.as_slice()[q * n..(q + 1) * n]
    }

    pub fn set_column(&mut self, q: usize, v: &[Complex64]) {
        self.columns.column_mut(q).copy_from_slice(v);
    }
}

/// Dense model covariance `V diag(gamma_r gamma_beta) V^H + noise I`.
pub fn model_covariance(grid: &GridModel, dict: &Dictionary, noise_variance: f64) -> CMatrix {
    let n = dict.columns.nrows();
    let mut sigma = CMatrix::from_diagonal_element(n, n, Complex64::new(noise_variance, 0.0));
    for q in 0..grid.len() {
        let s = grid.gamma_r[q] * grid.gamma_beta[q];
        if s > 0.0 {
            add_outer(&mut sigma, dict.column(q), s);
        }
    }
    sigma
}

/// Inverse model covariance built by successive rank-1 updates from `noise^-1 I`.
pub fn model_covariance_inverse(
    grid: &GridModel,
    dict: &Dictionary,
    noise_variance: f64,
) -> Result<HermitianInverse> {
    let mut inv = HermitianInverse::scaled_identity(dict.columns.nrows(), noise_variance)?;
    for q in 0..grid.len() {
        let s = grid.gamma_r[q] * grid.gamma_beta[q];
        if s > 0.0 {
            inv.rank1_update(dict.column(q), s)?;
        }
    }
    Ok(inv)
}

/// Cluster penalty `eta/2 * sum over neighbour pairs of (s_q - s_q')^2`, `s = gamma_r gamma_beta`.
pub fn cluster_penalty(grid: &GridModel, eta: f64) -> f64 {
    if eta == 0.0 {
        return 0.0;
    }
    let s: Vec<f64> = grid.weights();
    0.5 * eta
        * grid
            .adjacency
            .iter()
            .map(|&(i, j)| (s[i] - s[j]).powi(2))
            .sum::<f64>()
}

/// `ln|Sigma| + tr(Sigma^-1 S_hat)` evaluated directly through a Cholesky factorisation.
pub fn ml_cost(
    grid: &GridModel,
    dict: &Dictionary,
    shat: &CMatrix,
    noise_variance: f64,
) -> Result<f64> {
    let sigma = model_covariance(grid, dict, noise_variance);
    let n = sigma.nrows();
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::Numeric("model covariance is not positive definite".into()))?;
    let l = chol.l_dirty();
    let logdet: f64 = (0..n).map(|i| 2.0 * l[(i, i)].re.ln()).sum();
    let x = chol.solve(shat);
    let tr: f64 = (0..n).map(|i| x[(i, i)].re).sum();
    Ok(logdet + tr)
}

/// Penalized objective of the single-view problem.
pub fn penalized_ml_cost(
    grid: &GridModel,
    dict: &Dictionary,
    shat: &CMatrix,
    noise_variance: f64,
    eta: f64,
) -> Result<f64> {
    Ok(ml_cost(grid, dict, shat, noise_variance)? + cluster_penalty(grid, eta))
}

/// Indices kept by descending intensity until their running sum reaches
/// `fraction` of the total; ties go to the lower index.
pub fn threshold_support(values: &[f64], fraction: f64) -> Vec<bool> {
    let mut keep = vec![false; values.len()];
    let total: f64 = values.iter().filter(|v| **v > 0.0).sum();
    if !(total > 0.0) {
        return keep;
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let target = fraction * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    for i in order {
        if acc >= target || values[i] <= 0.0 {
            break;
        }
        keep[i] = true;
        acc += values[i];
    }
    keep
}
