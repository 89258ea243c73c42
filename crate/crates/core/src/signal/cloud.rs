use rand::Rng;

use super::{stream_rng, CLOUD_STREAM};
use crate::geometry::{Point, Scene};
use crate::{Error, Result};

/// Monte-Carlo discretisation of the target region.
#[derive(Debug, Clone, PartialEq)]
pub struct ScattererCloud {
    pub points: Vec<Point>,
    /// Normalized scattering intensity of each point; sums to one.
    pub weights: Vec<f64>,
    /// `visible[k][i]`: receiver `k` observes point `i`.
    pub visible: Vec<Vec<bool>>,
}

impl ScattererCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Builds a cloud from explicit points and weights, deriving visibility from `scene`.
    pub fn from_points(scene: &Scene, points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidArgument(
                "one weight per point required".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument(
                "cloud weights must be nonnegative".into(),
            ));
        }
        let visible = (0..scene.num_receivers())
            .map(|k| points.iter().map(|&p| scene.visibility(k, p)).collect())
            .collect();
        Ok(ScattererCloud {
            points,
            weights,
            visible,
        })
    }

    /// Single-point cloud at `p` carrying the full unit intensity.
    pub fn single(scene: &Scene, p: Point) -> Result<Self> {
        Self::from_points(scene, vec![p], vec![1.0])
    }
}

/// Uniform sampling of the union of targets at `density` points per square meter.
///
/// Candidates are drawn uniformly in the joint bounding box of all targets
/// (`round(density * box area)` draws) and kept when they fall inside a
/// target, so the expected count is `density * area(S)`.
pub fn sample_cloud(scene: &Scene, density: f64, seed: u64) -> Result<ScattererCloud> {
    if !(density > 0.0) || !density.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "cloud density must be positive, got {density}"
        )));
    }
    if scene.targets.is_empty() {
        return Err(Error::InvalidArgument(
            "scene has no targets to sample".into(),
        ));
    }
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for t in &scene.targets {
        let (a, b) = t.bounding_box();
        lo = Point::new(lo.x.min(a.x), lo.y.min(a.y));
        hi = Point::new(hi.x.max(b.x), hi.y.max(b.y));
    }
    let draws = (density * (hi.x - lo.x) * (hi.y - lo.y)).round() as usize;
    let mut rng = stream_rng(seed, CLOUD_STREAM);
    let mut points = Vec::new();
    for _ in 0..draws {
        let p = Point::new(
            lo.x + (hi.x - lo.x) * rng.random::<f64>(),
            lo.y + (hi.y - lo.y) * rng.random::<f64>(),
        );
        if scene.contains(p) {
            points.push(p);
        }
    }
    if points.is_empty() {
        return Err(Error::InvalidArgument(
            "target region is empty at the requested sampling density".into(),
        ));
    }
    let w = 1.0 / points.len() as f64;
    let weights = vec![w; points.len()];
    ScattererCloud::from_points(scene, points, weights)
}
