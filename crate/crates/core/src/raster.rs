//! Regular rasters over the region of interest and their text/PGM exports.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point, RegionOfInterest, Scene};
use crate::{Error, Result};

/// Layout of an `nx` by `ny` raster of equal cells tiling the region of interest.
///
/// Cells are indexed row-major with row 0 at the bottom (`y1`) of the region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterSpec {
    pub nx: usize,
    pub ny: usize,
    pub roi: RegionOfInterest,
}

impl RasterSpec {
    pub fn new(nx: usize, ny: usize, roi: RegionOfInterest) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(
                "raster dimensions must be positive".into(),
            ));
        }
        Ok(RasterSpec { nx, ny, roi })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_width(&self) -> f64 {
        self.roi.width() / self.nx as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.roi.height() / self.ny as f64
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn center(&self, ix: usize, iy: usize) -> Point {
        Point::new(
            self.roi.x1 + (ix as f64 + 0.5) * self.cell_width(),
            self.roi.y1 + (iy as f64 + 0.5) * self.cell_height(),
        )
    }

    pub fn center_of(&self, idx: usize) -> Point {
        let (ix, iy) = self.coords(idx);
        self.center(ix, iy)
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.center_of(i)).collect()
    }

    /// Cell containing `p`, with points on or beyond the border snapped inward.
    pub fn cell_of(&self, p: Point) -> (usize, usize) {
        let fx = ((p.x - self.roi.x1) / self.cell_width()).floor();
        let fy = ((p.y - self.roi.y1) / self.cell_height()).floor();
        let ix = (fx.max(0.0) as usize).min(self.nx - 1);
        let iy = (fy.max(0.0) as usize).min(self.ny - 1);
        (ix, iy)
    }

    /// Cells whose centers lie inside any target of `scene`.
    pub fn truth_mask(&self, scene: &Scene) -> Vec<bool> {
        (0..self.len())
            .map(|i| scene.contains(self.center_of(i)))
            .collect()
    }
}

/// Values on a [`RasterSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegularRaster {
    pub spec: RasterSpec,
    pub values: Vec<f64>,
}

impl RegularRaster {
    pub fn zeros(spec: RasterSpec) -> Self {
        RegularRaster {
            spec,
            values: vec![0.0; spec.len()],
        }
    }

    pub fn from_values(spec: RasterSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidArgument(format!(
                "raster needs {} values, got {}",
                spec.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("raster values must be finite".into()));
        }
        Ok(RegularRaster { spec, values })
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.spec.index(ix, iy)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// One CSV line per raster row, bottom row first.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 24);
        for row in self.values.chunks(self.spec.nx) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{v:e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, spec: RasterSpec) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let malformed = |reason: String| Error::MalformedArtifact {
            path: path.to_path_buf(),
            reason,
        };
        let mut values = Vec::with_capacity(spec.len());
        for (r, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| malformed(format!("row {r}: {e}")))?;
            if row.len() != spec.nx {
                return Err(malformed(format!(
                    "row {r} has {} columns, expected {}",
                    row.len(),
                    spec.nx
                )));
            }
            values.extend(row);
        }
        if values.len() != spec.len() {
            return Err(malformed(format!(
                "expected {} rows, found {}",
                spec.ny,
                values.len() / spec.nx
            )));
        }
        RegularRaster::from_values(spec, values)
    }

    /// Binary 8-bit PGM, min-max normalized, top image row = largest y.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let (lo, hi) = (self.min(), self.max());
        let span = hi - lo;
        let mut out = format!("P5\n{} {}\n255\n", self.spec.nx, self.spec.ny).into_bytes();
        for iy in (0..self.spec.ny).rev() {
            for ix in 0..self.spec.nx {
                let v = self.get(ix, iy);
                let g = if span > 0.0 { (v - lo) / span } else { 0.0 };
                out.push((g * 255.0).round().clamp(0.0, 255.0) as u8);
            }
        }
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_pgm_bytes()).map_err(|e| Error::io(path, e))
    }
}
