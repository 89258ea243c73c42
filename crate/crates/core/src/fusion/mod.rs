//! Multi-view fusion of interpolated single-view rasters.
//!
//! Minimises over `gamma in [0, 1]^Q'` and binary `Lambda`
//!
//! ```text
//! sum_k sum_q [ l_kq b_kq (g_kq - gamma_q)^2 + (1 - l_kq) b_kq g_kq^2 ]
//!     + mu |gamma|_1 + eta |D gamma|_1
//! ```
//!
//! alternating the closed-form `Lambda` selection with scaled ADMM on the
//! split `z = D gamma`. `b_kq` are path losses at the cell centers, scaled to
//! unit mean.

mod tv;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{path_loss, Scene};
use crate::numerics::cg_solve_from;
use crate::raster::{RasterSpec, RegularRaster};
use crate::{Error, Result};

pub use tv::TvOperator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    /// l1 weight; `None` selects `mu_scale * max input`.
    pub mu: Option<f64>,
    /// TV weight; `None` selects `eta_ratio * mu`.
    pub eta: Option<f64>,
    pub mu_scale: f64,
    pub eta_ratio: f64,
    pub rho: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub iter_max: usize,
    pub iter1: usize,
    pub eps1: f64,
    pub eps2: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            mu: None,
            eta: None,
            mu_scale: 0.1,
            eta_ratio: 2.0,
            rho: 1.0,
            cg_tol: 1e-8,
            cg_max_iter: 500,
            iter_max: 30,
            iter1: 20,
            eps1: 1e-4,
            eps2: 1e-4,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::Config("fusion rho must be positive".into()));
        }
        if !(self.mu_scale >= 0.0) || !(self.eta_ratio >= 0.0) {
            return Err(Error::Config(
                "fusion mu_scale and eta_ratio must be nonnegative".into(),
            ));
        }
        for (name, v) in [("mu", self.mu), ("eta", self.eta)] {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    return Err(Error::Config(format!("fusion {name} must be nonnegative")));
                }
            }
        }
        if !(self.cg_tol > 0.0) || self.cg_max_iter == 0 {
            return Err(Error::Config("invalid conjugate-gradient settings".into()));
        }
        Ok(())
    }

    /// `(mu, eta)` for the given inputs.
    pub fn resolve(&self, inputs: &FusionInputs) -> (f64, f64) {
        let max = inputs.rasters.iter().flatten().cloned().fold(0.0, f64::max);
        let mu = self.mu.unwrap_or(self.mu_scale * max);
        (mu, self.eta.unwrap_or(self.eta_ratio * mu))
    }
}

/// Per-receiver rasters on a common grid with their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionInputs {
    pub spec: RasterSpec,
    pub rasters: Vec<Vec<f64>>,
    /// Path-loss weights per receiver and cell, already normalised.
    pub weights: Vec<Vec<f64>>,
}

impl FusionInputs {
    pub fn new(spec: RasterSpec, rasters: Vec<Vec<f64>>, weights: Vec<Vec<f64>>) -> Result<Self> {
        if rasters.is_empty() || rasters.len() != weights.len() {
            return Err(Error::InvalidArgument(
                "need one weight raster per input raster".into(),
            ));
        }
        for (r, w) in rasters.iter().zip(&weights) {
            if r.len() != spec.len() || w.len() != spec.len() {
                return Err(Error::InvalidArgument("raster dimensions differ".into()));
            }
            if r.iter().any(|v| !v.is_finite()) || w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidArgument(
                    "rasters must be finite with positive weights".into(),
                ));
            }
        }
        Ok(FusionInputs {
            spec,
            rasters,
            weights,
        })
    }

    /// Weights from the path loss of every receiver at the cell centers, scaled to unit mean.
    pub fn from_scene(scene: &Scene, rasters: Vec<RegularRaster>) -> Result<Self> {
        if rasters.len() != scene.num_receivers() {
            return Err(Error::InvalidArgument(format!(
                "expected {} rasters, got {}",
                scene.num_receivers(),
                rasters.len()
            )));
        }
        let spec = rasters[0].spec;
        let centers = spec.centers();
        let mut weights = Vec::with_capacity(rasters.len());
        for rx in &scene.rxs {
            weights.push(
                centers
                    .iter()
                    .map(|&c| path_loss(scene.tx.position, rx.position, c, scene.beta0_sq))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let total: f64 = weights.iter().flatten().sum();
        let mean = total / (weights.len() * spec.len()) as f64;
        for w in weights.iter_mut().flatten() {
            *w /= mean;
        }
        let rasters = rasters
            .into_iter()
            .map(|r| {
                if r.spec != spec {
                    Err(Error::InvalidArgument("rasters use different grids".into()))
                } else {
                    Ok(r.values)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        FusionInputs::new(spec, rasters, weights)
    }

    pub fn num_views(&self) -> usize {
        self.rasters.len()
    }
}

/// Iterates of the fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionState {
    pub gamma: Vec<f64>,
    /// `lambda[k][q]`
    pub lambda: Vec<Vec<bool>>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
}

impl FusionState {
    /// Clamped sum of the inputs, `z = D gamma`, `u = 0`, `Lambda = 1`.
    pub fn initial(inputs: &FusionInputs, tv: &TvOperator) -> Self {
        let n = inputs.spec.len();
        let gamma: Vec<f64> = (0..n)
            .map(|q| {
                inputs
                    .rasters
                    .iter()
                    .map(|r| r[q])
                    .sum::<f64>()
                    .clamp(0.0, 1.0)
            })
            .collect();
        let z = tv.apply(&gamma);
        FusionState {
            gamma,
            lambda: vec![vec![true; n]; inputs.num_views()],
            u: vec![0.0; z.len()],
            z,
        }
    }
}

/// Weighted least-squares data term.
pub fn wls_cost(state: &FusionState, inputs: &FusionInputs) -> f64 {
    let mut acc = 0.0;
    for ((r, w), l) in inputs
        .rasters
        .iter()
        .zip(&inputs.weights)
        .zip(&state.lambda)
    {
        for q in 0..r.len() {
            acc += if l[q] {
                w[q] * (r[q] - state.gamma[q]).powi(2)
            } else {
                w[q] * r[q] * r[q]
            };
        }
    }
    acc
}

/// Closed-form selection: receiver `k` joins cell `q` unless `gamma^2 - 2 gamma g_kq > 0`.
pub fn lambda_update(state: &mut FusionState, inputs: &FusionInputs) {
    for (r, l) in inputs.rasters.iter().zip(state.lambda.iter_mut()) {
        for q in 0..r.len() {
            let g = state.gamma[q];
            l[q] = g * g - 2.0 * g * r[q] <= 0.0;
        }
    }
}

/// Solves the `gamma` subproblem by conjugate gradient and clamps to `[0, 1]`.
/// Returns the CG iteration count.
pub fn gamma_update(
    state: &mut FusionState,
    inputs: &FusionInputs,
    tv: &TvOperator,
    mu: f64,
    config: &FusionConfig,
) -> Result<usize> {
    let n = inputs.spec.len();
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for ((r, w), l) in inputs
        .rasters
        .iter()
        .zip(&inputs.weights)
        .zip(&state.lambda)
    {
        for q in 0..n {
            if l[q] {
                diag[q] += 2.0 * w[q];
                rhs[q] += 2.0 * w[q] * r[q];
            }
        }
    }
    let zu: Vec<f64> = state.z.iter().zip(&state.u).map(|(z, u)| z + u).collect();
    let dt = tv.apply_transpose(&zu);
    for q in 0..n {
        rhs[q] += config.rho * dt[q] - mu;
    }
    let rho = config.rho;
    let outcome = cg_solve_from(
        |x, out| {
            let dtd = tv.apply_normal(x);
            for q in 0..x.len() {
                out[q] = diag[q] * x[q] + rho * dtd[q];
            }
        },
        &rhs,
        Some(&state.gamma),
        config.cg_tol,
        config.cg_max_iter,
    )?;
    state.gamma = outcome.x.into_iter().map(|g| g.clamp(0.0, 1.0)).collect();
    Ok(outcome.iterations)
}

/// Elementwise soft threshold `sign(x) max(|x| - t, 0)`.
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

/// `z = soft(D gamma - u, eta / rho)`.
pub fn z_update(state: &mut FusionState, tv: &TvOperator, eta: f64, rho: f64) {
    let dg = tv.apply(&state.gamma);
    let t = eta / rho;
    state.z = dg
        .iter()
        .zip(&state.u)
        .map(|(d, u)| soft_threshold(d - u, t))
        .collect();
}

/// `u += z - D gamma`.
pub fn u_update(state: &mut FusionState, tv: &TvOperator) {
    let dg = tv.apply(&state.gamma);
    for ((u, z), d) in state.u.iter_mut().zip(&state.z).zip(&dg) {
        *u += z - d;
    }
}

/// Objective value split into its terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionObjective {
    pub wls: f64,
    pub l1: f64,
    pub tv: f64,
    pub total: f64,
}

pub fn fusion_objective(
    state: &FusionState,
    inputs: &FusionInputs,
    tv: &TvOperator,
    mu: f64,
    eta: f64,
) -> FusionObjective {
    let wls = wls_cost(state, inputs);
    let l1 = mu * state.gamma.iter().map(|g| g.abs()).sum::<f64>();
    let tvv = eta * tv.apply(&state.gamma).iter().map(|d| d.abs()).sum::<f64>();
    FusionObjective {
        wls,
        l1,
        tv: tvv,
        total: wls + l1 + tvv,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionTraceEntry {
    pub outer: usize,
    pub objective: FusionObjective,
    /// `|z - D gamma| / max(|D gamma|, tiny)`.
    pub primal_residual: f64,
    pub gamma_change: f64,
    pub lambda_change: f64,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    pub state: FusionState,
    pub mu: f64,
    pub eta: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<FusionTraceEntry>,
}

impl FusionResult {
    pub fn raster(&self, spec: RasterSpec) -> Result<RegularRaster> {
        RegularRaster::from_values(spec, self.state.gamma.clone())
    }

    /// Trace as CSV with one row per outer iteration.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from(
            "outer,objective,wls,l1,tv,primal_residual,gamma_change,lambda_change,cg_iterations\n",
        );
        for t in &self.trace {
            writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                t.outer,
                t.objective.total,
                t.objective.wls,
                t.objective.l1,
                t.objective.tv,
                t.primal_residual,
                t.gamma_change,
                t.lambda_change,
                t.cg_iterations
            )
            .unwrap();
        }
        s
    }

    /// Writes the selection of every receiver as a 0/1 raster CSV.
    pub fn write_lambda(&self, dir: &Path, spec: RasterSpec) -> Result<Vec<std::path::PathBuf>> {
        let mut out = Vec::new();
        for (k, l) in self.state.lambda.iter().enumerate() {
            let vals = l.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let path = dir.join(format!("lambda_rx{k}.csv"));
            RegularRaster::from_values(spec, vals)?.write_csv(&path)?;
            out.push(path);
        }
        Ok(out)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative change `|a - b| / |b|`, with `0 / 0` read as no change.
fn relative_change(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (num, den) = (norm(&diff), norm(b));
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn lambda_as_f64(l: &[Vec<bool>]) -> Vec<f64> {
    l.iter()
        .flatten()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect()
}

/// Alternates `Lambda` selection and `iter1` ADMM cycles until both relative changes are small.
pub fn run_fusion(inputs: &FusionInputs, config: &FusionConfig) -> Result<FusionResult> {
    config.validate()?;
    let tv = TvOperator::new(inputs.spec.nx, inputs.spec.ny);
    let (mu, eta) = config.resolve(inputs);
    let mut state = FusionState::initial(inputs, &tv);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for outer in 1..=config.iter_max {
        iterations = outer;
        let gamma_prev = state.gamma.clone();
        let lambda_prev = lambda_as_f64(&state.lambda);
        lambda_update(&mut state, inputs);
        let mut cg_iterations = 0;
        for _ in 0..config.iter1 {
            cg_iterations += gamma_update(&mut state, inputs, &tv, mu, config)?;
            z_update(&mut state, &tv, eta, config.rho);
            u_update(&mut state, &tv);
        }
        let dg = tv.apply(&state.gamma);
        let res: Vec<f64> = state.z.iter().zip(&dg).map(|(z, d)| z - d).collect();
        let gamma_change = relative_change(&state.gamma, &gamma_prev);
        let lambda_change = relative_change(&lambda_as_f64(&state.lambda), &lambda_prev);
        trace.push(FusionTraceEntry {
            outer,
            objective: fusion_objective(&state, inputs, &tv, mu, eta),
            primal_residual: norm(&res) / norm(&dg).max(f64::MIN_POSITIVE),
            gamma_change,
            lambda_change,
            cg_iterations,
        });
        if gamma_change <= config.eps1 && lambda_change <= config.eps2 {
            converged = true;
            break;
        }
    }
    Ok(FusionResult {
        state,
        mu,
        eta,
        iterations,
        converged,
        trace,
    })
}
