use serde::{Deserialize, Serialize};

use super::Phase1Problem;
use crate::geometry::{Point, RegionOfInterest};
use crate::{Error, Result};

/// Optimisation state of one receiver: grid positions, intensities and path losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridModel {
    pub positions: Vec<Point>,
    pub initial_positions: Vec<Point>,
    pub gamma_r: Vec<f64>,
    /// Path loss at the current position of each grid point.
    pub gamma_beta: Vec<f64>,
    /// Unordered neighbour pairs `(i, j)`, `i < j`.
    pub adjacency: Vec<(usize, usize)>,
    pub d_max: f64,
    pub roi: RegionOfInterest,
    #[serde(skip)]
    neighbors: Vec<Vec<usize>>,
}

impl GridModel {
    /// `side x side` grid at the cell centers of the region with 4-neighbour adjacency.
    pub fn uniform(problem: &Phase1Problem, q: usize, d_max_factor: f64) -> Result<Self> {
        let side = (q as f64).sqrt().round() as usize;
        if q == 0 || side * side != q {
            return Err(Error::InvalidArgument(format!(
                "grid size {q} is not a perfect square"
            )));
        }
        let roi = problem.scene.roi;
        let dx = roi.width() / side as f64;
        let dy = roi.height() / side as f64;
        let mut positions = Vec::with_capacity(q);
        let mut adjacency = Vec::new();
        for iy in 0..side {
            for ix in 0..side {
                positions.push(Point::new(
                    roi.x1 + (ix as f64 + 0.5) * dx,
                    roi.y1 + (iy as f64 + 0.5) * dy,
                ));
                let i = iy * side + ix;
                if ix + 1 < side {
                    adjacency.push((i, i + 1));
                }
                if iy + 1 < side {
                    adjacency.push((i, i + side));
                }
            }
        }
        let gamma_beta = positions
            .iter()
            .map(|&p| problem.path_loss(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(GridModel::from_parts(
            positions.clone(),
            positions,
            vec![0.0; q],
            gamma_beta,
            adjacency,
            d_max_factor * dx.min(dy),
            roi,
        ))
    }

    pub fn from_parts(
        positions: Vec<Point>,
        initial_positions: Vec<Point>,
        gamma_r: Vec<f64>,
        gamma_beta: Vec<f64>,
        adjacency: Vec<(usize, usize)>,
        d_max: f64,
        roi: RegionOfInterest,
    ) -> Self {
        let mut g = GridModel {
            positions,
            initial_positions,
            gamma_r,
            gamma_beta,
            adjacency,
            d_max,
            roi,
            neighbors: Vec::new(),
        };
        g.rebuild_neighbors();
        g
    }

    /// Recomputes the per-point neighbour lists from `adjacency`.
    pub fn rebuild_neighbors(&mut self) {
        let mut nb = vec![Vec::new(); self.positions.len()];
        for &(i, j) in &self.adjacency {
            nb[i].push(j);
            nb[j].push(i);
        }
        self.neighbors = nb;
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.neighbors[q]
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `gamma_r * gamma_beta` per grid point.
    pub fn weights(&self) -> Vec<f64> {
        self.gamma_r
            .iter()
            .zip(&self.gamma_beta)
            .map(|(r, b)| r * b)
            .collect()
    }

    /// Indices with intensity above `threshold`.
    pub fn active_set(&self, threshold: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&q| self.gamma_r[q] > threshold)
            .collect()
    }

    /// Whether every point satisfies the box, region and move-radius constraints.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.gamma_r.iter().all(|g| (-tol..=1.0 + tol).contains(g))
            && self
                .positions
                .iter()
                .zip(&self.initial_positions)
                .all(|(&p, &p0)| {
                    p.x >= self.roi.x1 - tol
                        && p.x <= self.roi.x2 + tol
                        && p.y >= self.roi.y1 - tol
                        && p.y <= self.roi.y2 + tol
                        && p.dist(p0) <= self.d_max + tol
                })
    }
}
