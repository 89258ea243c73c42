use serde::{Deserialize, Serialize};

use super::{
    intensity_sweep, penalized_ml_cost, position_sweep, Dictionary, GridModel, Phase1Config,
    Phase1Problem,
};
use crate::numerics::HermitianInverse;
use crate::signal::stream_rng;
use crate::Result;

/// RNG stream of the coordinate visiting order for receiver `k`.
fn order_stream(k: usize) -> u64 {
    (1u64 << 63) + 16 + k as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceStage {
    Intensity,
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub stage: TraceStage,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct Phase1Result {
    pub grid: GridModel,
    pub eta: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_cost: f64,
    /// Empty unless `record_trace` was set.
    pub trace: Vec<TraceEntry>,
}

/// Alternates intensity and position sweeps from a uniform grid with zero intensities.
pub fn run_phase1(
    problem: &Phase1Problem,
    config: &Phase1Config,
    seed: u64,
) -> Result<Phase1Result> {
    config.validate()?;
    let mut grid = GridModel::uniform(problem, config.q, config.d_max_factor)?;
    let mut dict = Dictionary::build(problem, &grid)?;
    let mut inv = HermitianInverse::scaled_identity(problem.dim(), problem.noise_variance)?
        .with_refresh_interval(config.refresh_interval);
    let eta = config.resolve_eta(&grid);
    let mut rng = stream_rng(seed, order_stream(problem.k));
    let mut trace = Vec::new();
    let noise = problem.noise_variance;
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=config.iter_max {
        iterations = it;
        let before = grid.gamma_r.clone();
        intensity_sweep(
            &mut grid,
            &dict,
            &mut inv,
            problem.shat,
            noise,
            eta,
            config.iter1,
            config.subset_size,
            &mut rng,
        )?;
        if config.record_trace {
            trace.push(TraceEntry {
                iteration: it,
                stage: TraceStage::Intensity,
                cost: penalized_ml_cost(&grid, &dict, problem.shat, noise, eta)?,
            });
        }
        let mut pg = 0.0;
        if config.optimize_positions {
            let report = position_sweep(
                problem,
                &mut grid,
                &mut dict,
                &mut inv,
                eta,
                config.iter2,
                config.active_threshold,
                &config.armijo,
            )?;
            pg = report.projected_gradient_norm;
            if config.record_trace {
                trace.extend(report.costs.iter().map(|&cost| TraceEntry {
                    iteration: it,
                    stage: TraceStage::Position,
                    cost,
                }));
            }
        }
        let num: f64 = grid
            .gamma_r
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let den: f64 = grid.gamma_r.iter().map(|a| a * a).sum();
        let rel = if den > 0.0 { num / den } else { 0.0 };
        if den > 0.0 && rel <= config.eps1 && pg <= config.eps2 {
            converged = true;
            break;
        }
    }
    let final_cost = penalized_ml_cost(&grid, &dict, problem.shat, noise, eta)?;
    Ok(Phase1Result {
        grid,
        eta,
        iterations,
        converged,
        final_cost,
        trace,
    })
}
