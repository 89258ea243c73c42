//! Edge-preserving natural neighbour interpolation (EP-NNI) of an irregular
//! single-view image onto the shared regular raster.
//!
//! Sibson weights are obtained by rasterizing the Voronoi partitions of the
//! irregular and the regular sites at a fine resolution and counting shared
//! cells. Each weight is then damped by `exp(-d^T J d / (2 sigma^2))` where `J`
//! is the local structure tensor of plane-fitted gradients, so contributions
//! across an intensity edge are suppressed.

mod nearest;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point, RegionOfInterest};
use crate::numerics::svd2;
use crate::raster::{RasterSpec, RegularRaster};
use crate::{Error, Result};

pub use nearest::SiteIndex;

/// Interpolator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EPConfig {
    /// Nearest irregular points used for each plane fit.
    pub plane_fit_neighbors: usize,
    /// Edge decay `sigma_EP^2`; `None` selects it from the data.
    pub sigma_ep_sq: Option<f64>,
    /// Voronoi raster resolution; `None` means eight times the raster width.
    pub resolution: Option<usize>,
    /// `false` gives plain natural neighbour interpolation.
    pub edge_preserving: bool,
}

impl Default for EPConfig {
    fn default() -> Self {
        EPConfig {
            plane_fit_neighbors: 8,
            sigma_ep_sq: None,
            resolution: None,
            edge_preserving: true,
        }
    }
}

impl EPConfig {
    pub fn validate(&self, spec: &RasterSpec) -> Result<()> {
        if self.plane_fit_neighbors < 3 {
            return Err(Error::Config(
                "plane-fit neighbourhood must hold at least 3 points".into(),
            ));
        }
        if let Some(s) = self.sigma_ep_sq {
            if !(s > 0.0) {
                return Err(Error::Config("sigma_ep_sq must be positive".into()));
            }
        }
        if let Some(r) = self.resolution {
            if r < spec.nx.max(spec.ny) {
                return Err(Error::Config(
                    "Voronoi resolution must be at least the raster width".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn resolve_resolution(&self, spec: &RasterSpec) -> usize {
        self.resolution.unwrap_or(8 * spec.nx.max(spec.ny))
    }
}

/// Nearest-site labels of an `r x r` raster over the region.
#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiPartition {
    pub resolution: usize,
    pub roi: RegionOfInterest,
    /// Row-major from the bottom row, like [`RasterSpec::index`].
    pub labels: Vec<u32>,
    pub num_sites: usize,
}

impl VoronoiPartition {
    pub fn build(sites: &[Point], roi: RegionOfInterest, resolution: usize) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidArgument(
                "Voronoi partition needs at least one site".into(),
            ));
        }
        let spec = RasterSpec::new(resolution, resolution, roi)?;
        let index = SiteIndex::new(sites);
        let labels = (0..spec.len())
            .into_par_iter()
            .map(|i| index.nearest(spec.center_of(i)) as u32)
            .collect();
        Ok(VoronoiPartition {
            resolution,
            roi,
            labels,
            num_sites: sites.len(),
        })
    }
}

/// Sparse Sibson weights: for each query site, `(irregular index, weight)` pairs summing to 1.
pub type SibsonWeights = Vec<Vec<(usize, f64)>>;

/// Area-overlap weights between the Voronoi cells of `queries` and of `sites`.
pub fn sibson_weights(
    sites: &[Point],
    queries: &[Point],
    roi: RegionOfInterest,
    resolution: usize,
) -> Result<SibsonWeights> {
    let irregular = VoronoiPartition::build(sites, roi, resolution)?;
    let regular = VoronoiPartition::build(queries, roi, resolution)?;
    let mut counts: Vec<Vec<(usize, usize)>> = vec![Vec::new(); queries.len()];
    for (&lq, &ls) in regular.labels.iter().zip(&irregular.labels) {
        let row = &mut counts[lq as usize];
        match row.iter_mut().find(|(s, _)| *s == ls as usize) {
            Some(entry) => entry.1 += 1,
            None => row.push((ls as usize, 1)),
        }
    }
    let index = SiteIndex::new(sites);
    Ok(counts
        .into_iter()
        .zip(queries)
        .map(|(mut row, &qp)| {
            if row.is_empty() {
                return vec![(index.nearest(qp), 1.0)];
            }
            row.sort_unstable();
            let total: usize = row.iter().map(|e| e.1).sum();
            row.into_iter()
                .map(|(s, c)| (s, c as f64 / total as f64))
                .collect()
        })
        .collect())
}

/// Least-squares plane gradient through `(position, value)` samples.
///
/// Returns `None` for fewer than three samples or a (near-)collinear set.
pub fn plane_fit_gradient(points: &[(Point, f64)]) -> Option<[f64; 2]> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let (mx, my, mv) = points.iter().fold((0.0, 0.0, 0.0), |acc, (p, v)| {
        (acc.0 + p.x / n, acc.1 + p.y / n, acc.2 + v / n)
    });
    let (mut sxx, mut sxy, mut syy, mut sxv, mut syv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, v) in points {
        let (dx, dy, dv) = (p.x - mx, p.y - my, v - mv);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxv += dx * dv;
        syv += dy * dv;
    }
    let det = sxx * syy - sxy * sxy;
    let scale = (sxx + syy) * (sxx + syy);
    if !(det > 1e-12 * scale) {
        return None;
    }
    Some([(syy * sxv - sxy * syv) / det, (sxx * syv - sxy * sxv) / det])
}

/// `sum_i w_i g_i g_i^T`.
pub fn structure_tensor(gradients: &[[f64; 2]], weights: &[f64]) -> [[f64; 2]; 2] {
    let mut j = [[0.0; 2]; 2];
    for (g, &w) in gradients.iter().zip(weights) {
        j[0][0] += w * g[0] * g[0];
        j[0][1] += w * g[0] * g[1];
        j[1][1] += w * g[1] * g[1];
    }
    j[1][0] = j[0][1];
    j
}

/// Sibson weight damped across edges: `w exp(-d^T J d / (2 sigma_sq))`.
pub fn ep_weight(w_sib: f64, d: [f64; 2], j: &[[f64; 2]; 2], sigma_sq: f64) -> f64 {
    let quad = d[0] * (j[0][0] * d[0] + j[0][1] * d[1]) + d[1] * (j[1][0] * d[0] + j[1][1] * d[1]);
    w_sib * (-quad / (2.0 * sigma_sq)).exp()
}

/// Plane-fitted gradient at every site from its `k` nearest sites (itself included).
pub fn site_gradients(sites: &[Point], values: &[f64], k: usize) -> (Vec<[f64; 2]>, usize) {
    let index = SiteIndex::new(sites);
    let out: Vec<Option<[f64; 2]>> = (0..sites.len())
        .into_par_iter()
        .map(|i| {
            let nb = index.k_nearest(sites[i], k);
            let pts: Vec<(Point, f64)> = nb.iter().map(|&j| (sites[j], values[j])).collect();
            plane_fit_gradient(&pts)
        })
        .collect();
    let degenerate = out.iter().filter(|g| g.is_none()).count();
    (
        out.into_iter().map(|g| g.unwrap_or([0.0, 0.0])).collect(),
        degenerate,
    )
}

/// Interpolated raster with the quantities chosen along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolation {
    pub raster: RegularRaster,
    pub sigma_ep_sq: f64,
    pub degenerate_fits: usize,
    /// Cells where every damped weight underflowed and Sibson weights were used.
    pub fallback_cells: usize,
}

/// Median over cells with a nonzero tensor of `lambda_1 * mean |d|^2 / 4`.
fn default_sigma(lambda1: &[f64], msd: &[f64]) -> f64 {
    let mut vals: Vec<f64> = lambda1
        .iter()
        .zip(msd)
        .map(|(l, m)| l * m / 4.0)
        .filter(|v| *v > 0.0 && v.is_finite())
        .collect();
    if vals.is_empty() {
        return 1.0;
    }
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    }
}

/// Interpolates `values` given at `sites` onto the cells of `spec`.
pub fn interpolate(
    sites: &[Point],
    values: &[f64],
    spec: RasterSpec,
    config: &EPConfig,
) -> Result<Interpolation> {
    config.validate(&spec)?;
    if sites.len() != values.len() || sites.is_empty() {
        return Err(Error::InvalidArgument(
            "sites and values must be nonempty and of equal length".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("interpolation input is not finite".into()));
    }
    let centers = spec.centers();
    let weights = sibson_weights(sites, &centers, spec.roi, config.resolve_resolution(&spec))?;
    let nni = |row: &[(usize, f64)]| -> f64 { row.iter().map(|&(s, w)| w * values[s]).sum() };
    if !config.edge_preserving {
        let vals = weights.iter().map(|row| nni(row)).collect();
        return Ok(Interpolation {
            raster: RegularRaster::from_values(spec, vals)?,
            sigma_ep_sq: f64::INFINITY,
            degenerate_fits: 0,
            fallback_cells: 0,
        });
    }
    let (grads, degenerate_fits) = site_gradients(sites, values, config.plane_fit_neighbors);
    let tensors: Vec<[[f64; 2]; 2]> = weights
        .iter()
        .map(|row| {
            let g: Vec<[f64; 2]> = row.iter().map(|&(s, _)| grads[s]).collect();
            let w: Vec<f64> = row.iter().map(|&(_, w)| w).collect();
            structure_tensor(&g, &w)
        })
        .collect();
    let sigma_ep_sq = match config.sigma_ep_sq {
        Some(s) => s,
        None => {
            let lambda1: Vec<f64> = tensors.iter().map(|j| svd2(*j).lambda1).collect();
            let msd: Vec<f64> = weights
                .iter()
                .zip(&centers)
                .map(|(row, c)| {
                    row.iter().map(|&(s, _)| sites[s].dist_sq(*c)).sum::<f64>() / row.len() as f64
                })
                .collect();
            default_sigma(&lambda1, &msd)
        }
    };
    let mut fallback_cells = 0;
    let vals: Vec<f64> = weights
        .iter()
        .zip(&tensors)
        .zip(&centers)
        .map(|((row, j), c)| {
            let mut num = 0.0;
            let mut den = 0.0;
            for &(s, w) in row {
                let d = [sites[s].x - c.x, sites[s].y - c.y];
                let we = ep_weight(w, d, j, sigma_ep_sq);
                num += we * values[s];
                den += we;
            }
            if den > 0.0 {
                num / den
            } else {
                fallback_cells += 1;
                nni(row)
            }
        })
        .collect();
    Ok(Interpolation {
        raster: RegularRaster::from_values(spec, vals)?,
        sigma_ep_sq,
        degenerate_fits,
        fallback_cells,
    })
}

#[cfg(test)]
mod tests;
