use num_complex::Complex64;

use super::{penalized_ml_cost, ArmijoConfig, Dictionary, GridModel, Phase1Problem};
use crate::geometry::{
    path_loss_gradient, sine_gradient, sine_of_angle, steering_from_sine, Point,
};
use crate::numerics::{cdot, herm_matvec, HermitianInverse};
use crate::signal::kron;
use crate::Result;

/// Outcome of one position sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionSweepReport {
    pub accepted_steps: usize,
    pub backtracks: usize,
    /// Penalized cost after each accepted step.
    pub costs: Vec<f64>,
    /// Norm of the projected gradient step `psi - P(psi - grad)` at the last evaluation.
    pub projected_gradient_norm: f64,
}

/// Projects a point onto the region intersected with the move disc around `p0`.
pub fn project_position(p: Point, p0: Point, grid: &GridModel) -> Point {
    let mut cur = grid.roi.clamp(p);
    for _ in 0..10 {
        let d = cur.dist(p0);
        if d <= grid.d_max {
            break;
        }
        let s = grid.d_max / d;
        cur = grid.roi.clamp(Point::new(
            p0.x + (cur.x - p0.x) * s,
            p0.y + (cur.y - p0.y) * s,
        ));
    }
    cur
}

/// Derivatives of the column of `problem` at `p` with respect to `p.x` and `p.y`.
fn column_derivatives(
    problem: &Phase1Problem,
    p: Point,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let tx = problem.scene.tx.position;
    let rx = problem.scene.rxs[problem.k].position;
    let n_tx = problem.pilot.n_tx();
    let n_rx = problem.n_rx();
    let st = sine_of_angle(tx, p)?;
    let sr = sine_of_angle(rx, p)?;
    let (stx, sty) = sine_gradient(tx, p)?;
    let (srx, sry) = sine_gradient(rx, p)?;
    let a = steering_from_sine(st, n_tx);
    let b = steering_from_sine(sr, n_rx);
    let da: Vec<Complex64> = a
        .iter()
        .enumerate()
        .map(|(i, ai)| Complex64::new(0.0, -std::f64::consts::PI * i as f64) * ai)
        .collect();
    let db: Vec<Complex64> = b
        .iter()
        .enumerate()
        .map(|(i, bi)| Complex64::new(0.0, -std::f64::consts::PI * i as f64) * bi)
        .collect();
    let vt = kron(&problem.pilot.transmit_response(&da), &b);
    let vr = kron(&problem.pilot.transmit_response(&a), &db);
    let dx = vt.iter().zip(&vr).map(|(t, r)| t * stx + r * srx).collect();
    let dy = vt.iter().zip(&vr).map(|(t, r)| t * sty + r * sry).collect();
    Ok((dx, dy))
}

/// Gradient of the unpenalized cost with respect to the positions in `active`,
/// returned as `(d/dx, d/dy)` pairs in the same order.
pub fn position_gradient(
    problem: &Phase1Problem,
    grid: &GridModel,
    dict: &Dictionary,
    inv: &HermitianInverse,
    active: &[usize],
) -> Result<Vec<(f64, f64)>> {
    let n = problem.dim();
    let tx = problem.scene.tx.position;
    let rx = problem.scene.rxs[problem.k].position;
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut sw = vec![Complex64::new(0.0, 0.0); n];
    let mut isw = vec![Complex64::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(active.len());
    for &q in active {
        let p = grid.positions[q];
        let v = dict.column(q);
        inv.apply(v, &mut w);
        herm_matvec(problem.shat, &w, &mut sw);
        inv.apply(&sw, &mut isw);
        let g: Vec<Complex64> = w.iter().zip(&isw).map(|(a, b)| a - b).collect();
        let (dvx, dvy) = column_derivatives(problem, p)?;
        let (gbx, gby) = path_loss_gradient(tx, rx, p, problem.scene.beta0_sq)?;
        let quad = cdot(v, &g).re;
        let s = grid.gamma_r[q] * grid.gamma_beta[q];
        let gx = 2.0 * s * cdot(&g, &dvx).re + grid.gamma_r[q] * gbx * quad;
        let gy = 2.0 * s * cdot(&g, &dvy).re + grid.gamma_r[q] * gby * quad;
        out.push((gx, gy));
    }
    Ok(out)
}

/// Gradient of the cluster penalty with respect to the positions in `active`.
pub fn penalty_position_gradient(
    problem: &Phase1Problem,
    grid: &GridModel,
    active: &[usize],
    eta: f64,
) -> Result<Vec<(f64, f64)>> {
    let tx = problem.scene.tx.position;
    let rx = problem.scene.rxs[problem.k].position;
    active
        .iter()
        .map(|&q| {
            if eta == 0.0 {
                return Ok((0.0, 0.0));
            }
            let sq = grid.gamma_r[q] * grid.gamma_beta[q];
            let diff: f64 = grid
                .neighbors(q)
                .iter()
                .map(|&j| sq - grid.gamma_r[j] * grid.gamma_beta[j])
                .sum();
            let (gbx, gby) = path_loss_gradient(tx, rx, grid.positions[q], problem.scene.beta0_sq)?;
            let f = eta * diff * grid.gamma_r[q];
            Ok((f * gbx, f * gby))
        })
        .collect()
}

fn move_points(
    problem: &Phase1Problem,
    grid: &mut GridModel,
    dict: &mut Dictionary,
    active: &[usize],
    targets: &[Point],
) -> Result<()> {
    for (&q, &p) in active.iter().zip(targets) {
        grid.positions[q] = p;
        grid.gamma_beta[q] = problem.path_loss(p)?;
        dict.set_column(q, &problem.column(p)?);
    }
    Ok(())
}

/// `iter2` projected-gradient steps with Armijo backtracking on the positions
/// of the grid points whose intensity exceeds `active_threshold`.
///
/// On return the inverse has been rebuilt for the final positions.
#[allow(clippy::too_many_arguments)]
pub fn position_sweep(
    problem: &Phase1Problem,
    grid: &mut GridModel,
    dict: &mut Dictionary,
    inv: &mut HermitianInverse,
    eta: f64,
    iter2: usize,
    active_threshold: f64,
    armijo: &ArmijoConfig,
) -> Result<PositionSweepReport> {
    let mut report = PositionSweepReport {
        accepted_steps: 0,
        backtracks: 0,
        costs: Vec::new(),
        projected_gradient_norm: 0.0,
    };
    let active = grid.active_set(active_threshold);
    if active.is_empty() {
        return Ok(report);
    }
    let noise = problem.noise_variance;
    let mut cost = penalized_ml_cost(grid, dict, problem.shat, noise, eta)?;
    for _ in 0..iter2 {
        let mut grad = position_gradient(problem, grid, dict, inv, &active)?;
        for (g, p) in grad
            .iter_mut()
            .zip(penalty_position_gradient(problem, grid, &active, eta)?)
        {
            g.0 += p.0;
            g.1 += p.1;
        }
        let current: Vec<Point> = active.iter().map(|&q| grid.positions[q]).collect();
        let pg: f64 = active
            .iter()
            .zip(&current)
            .zip(&grad)
            .map(|((&q, &p), &(gx, gy))| {
                let t = project_position(
                    Point::new(p.x - gx, p.y - gy),
                    grid.initial_positions[q],
                    grid,
                );
                p.dist_sq(t)
            })
            .sum();
        report.projected_gradient_norm = pg.sqrt();
        let gmax = grad
            .iter()
            .fold(0.0f64, |m, g| m.max(g.0.abs()).max(g.1.abs()));
        if !(gmax > 0.0) || !gmax.is_finite() {
            break;
        }
        let mut step = armijo.initial_step / gmax;
        let mut accepted = false;
        for _ in 0..=armijo.max_backtracks {
            let trial: Vec<Point> = active
                .iter()
                .zip(&current)
                .zip(&grad)
                .map(|((&q, &p), &(gx, gy))| {
                    project_position(
                        Point::new(p.x - step * gx, p.y - step * gy),
                        grid.initial_positions[q],
                        grid,
                    )
                })
                .collect();
            let decrease: f64 = trial
                .iter()
                .zip(&current)
                .zip(&grad)
                .map(|((t, p), g)| g.0 * (t.x - p.x) + g.1 * (t.y - p.y))
                .sum();
            if decrease == 0.0 {
                break;
            }
            let gb_before: Vec<f64> = active.iter().map(|&q| grid.gamma_beta[q]).collect();
            move_points(problem, grid, dict, &active, &trial)?;
            let trial_cost = penalized_ml_cost(grid, dict, problem.shat, noise, eta);
            if let Ok(c) = trial_cost {
                if c <= cost + armijo.sufficient_decrease * decrease {
                    cost = c;
                    accepted = true;
                    break;
                }
            }
            report.backtracks += 1;
            // restore the previous positions before shrinking
            for ((&q, &p), &gb) in active.iter().zip(&current).zip(&gb_before) {
                grid.positions[q] = p;
                grid.gamma_beta[q] = gb;
                dict.set_column(q, &problem.column(p)?);
            }
            step *= armijo.shrink;
        }
        if !accepted {
            break;
        }
        inv.reset(super::model_covariance(grid, dict, noise))?;
        report.accepted_steps += 1;
        report.costs.push(cost);
    }
    Ok(report)
}
