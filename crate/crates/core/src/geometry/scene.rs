use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{wrap_angle, Point, TargetShape};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayRole {
    Transmit,
    Receive,
}

/// Uniform linear array with half-wavelength spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Array2D {
    pub position: Point,
    pub num_antennas: usize,
    pub role: ArrayRole,
}

/// Rectangular region `[x1, x2] x [y1, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub x1: f64,
    pub x2: f64,
    pub y1: f64,
    pub y2: f64,
}

impl RegionOfInterest {
    pub fn new(x1: f64, x2: f64, y1: f64, y2: f64) -> Result<Self> {
        if !(x1 < x2 && y1 < y2) {
            return Err(Error::InvalidArgument(format!(
                "region of interest needs x1 < x2 and y1 < y2, got [{x1}, {x2}] x [{y1}, {y2}]"
            )));
        }
        Ok(RegionOfInterest { x1, x2, y1, y2 })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x1 && p.x <= self.x2 && p.y >= self.y1 && p.y <= self.y2
    }

    /// Componentwise clamp onto the rectangle.
    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.x1, self.x2), p.y.clamp(self.y1, self.y2))
    }
}

/// Angular blind sector of one receiver, as seen from the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldOfView {
    pub receiver: usize,
    /// Bearing of the sector center, radians, measured from the receiver.
    pub blind_center: f64,
    /// Full sector width in radians.
    pub blind_width: f64,
}

impl FieldOfView {
    pub fn open(receiver: usize) -> Self {
        FieldOfView {
            receiver,
            blind_center: 0.0,
            blind_width: 0.0,
        }
    }

    pub fn sees(&self, rx: Point, p: Point) -> bool {
        if self.blind_width <= 0.0 {
            return true;
        }
        if self.blind_width >= 2.0 * PI {
            return false;
        }
        let bearing = (p.y - rx.y).atan2(p.x - rx.x);
        wrap_angle(bearing - self.blind_center).abs() > 0.5 * self.blind_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub roi: RegionOfInterest,
    pub targets: Vec<TargetShape>,
    pub tx: Array2D,
    pub rxs: Vec<Array2D>,
    pub fovs: Vec<FieldOfView>,
    /// Reference path-loss power ratio (linear).
    pub beta0_sq: f64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if self.tx.role != ArrayRole::Transmit {
            return Err(Error::InvalidArgument(
                "tx array must have the transmit role".into(),
            ));
        }
        if self.rxs.is_empty() {
            return Err(Error::InvalidArgument(
                "scene needs at least one receiver".into(),
            ));
        }
        if self.rxs.iter().any(|r| r.role != ArrayRole::Receive) {
            return Err(Error::InvalidArgument(
                "rx arrays must have the receive role".into(),
            ));
        }
        if std::iter::once(&self.tx)
            .chain(&self.rxs)
            .any(|a| a.num_antennas == 0)
        {
            return Err(Error::InvalidArgument(
                "arrays need at least one antenna".into(),
            ));
        }
        if self.fovs.len() != self.rxs.len()
            || self.fovs.iter().enumerate().any(|(k, f)| f.receiver != k)
        {
            return Err(Error::InvalidArgument(
                "exactly one field of view per receiver, in receiver order".into(),
            ));
        }
        if self
            .fovs
            .iter()
            .any(|f| !(0.0..=2.0 * PI).contains(&f.blind_width))
        {
            return Err(Error::InvalidArgument(
                "blind width must lie in [0, 2pi]".into(),
            ));
        }
        if !(self.beta0_sq > 0.0) {
            return Err(Error::InvalidArgument("beta0^2 must be positive".into()));
        }
        for t in &self.targets {
            t.validate()?;
            let (lo, hi) = t.bounding_box();
            let eps = 1e-9;
            if lo.x < self.roi.x1 - eps
                || lo.y < self.roi.y1 - eps
                || hi.x > self.roi.x2 + eps
                || hi.y > self.roi.y2 + eps
            {
                return Err(Error::InvalidArgument(
                    "target extends outside the region of interest".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn num_receivers(&self) -> usize {
        self.rxs.len()
    }

    /// True when `p` lies inside any target.
    pub fn contains(&self, p: Point) -> bool {
        self.targets.iter().any(|t| t.contains(p))
    }

    /// Whether receiver `k` observes a scatterer at `p`.
    pub fn visibility(&self, k: usize, p: Point) -> bool {
        self.fovs[k].sees(self.rxs[k].position, p)
    }

    /// Overrides antenna counts (run configurations own the array sizes).
    pub fn with_antennas(mut self, n_tx: usize, n_rx: usize) -> Self {
        self.tx.num_antennas = n_tx;
        for r in &mut self.rxs {
            r.num_antennas = n_rx;
        }
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Scene> {
        let file: SceneFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("scene file: {e}")))?;
        file.into_scene()
    }

    pub fn load(path: &Path) -> Result<Scene> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scene::from_toml_str(&text)
    }

    pub fn to_file(&self) -> SceneFile {
        SceneFile::from_scene(self)
    }
}

/// On-disk scene schema (TOML). Angles in degrees, `beta0_db` as a power ratio in dB.
///
/// ```toml
/// beta0_db = -35.0
/// [roi]
/// x1 = 0.0
/// x2 = 15.0
/// y1 = 0.0
/// y2 = 15.0
/// [tx]
/// position = [-3.0, 7.5]
/// [[rx]]
/// position = [18.0, 7.5]
/// blind_center_deg = 180.0
/// blind_width_deg = 22.5
/// [[target]]
/// kind = "disc"
/// center = [5.0, 5.0]
/// radius = 2.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub beta0_db: f64,
    pub roi: RegionOfInterest,
    pub tx: ArrayEntry,
    pub rx: Vec<ArrayEntry>,
    #[serde(default)]
    pub target: Vec<TargetSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayEntry {
    pub position: Point,
    #[serde(default = "one")]
    pub antennas: usize,
    #[serde(default)]
    pub blind_center_deg: f64,
    #[serde(default)]
    pub blind_width_deg: f64,
}

fn one() -> usize {
    1
}

/// Target entry of the scene file; masks are written as rows of `#`/`.`, top row first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Polygon {
        vertices: Vec<Point>,
    },
    Disc {
        center: Point,
        radius: f64,
    },
    Annulus {
        center: Point,
        inner_radius: f64,
        outer_radius: f64,
    },
    Mask {
        origin: Point,
        cell_size: f64,
        rows: Vec<String>,
    },
}

impl TargetSpec {
    fn into_shape(self) -> TargetShape {
        match self {
            TargetSpec::Polygon { vertices } => TargetShape::Polygon { vertices },
            TargetSpec::Disc { center, radius } => TargetShape::Disc { center, radius },
            TargetSpec::Annulus {
                center,
                inner_radius,
                outer_radius,
            } => TargetShape::Annulus {
                center,
                inner_radius,
                outer_radius,
            },
            TargetSpec::Mask {
                origin,
                cell_size,
                rows,
            } => {
                let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
                TargetShape::mask_from_rows(origin, cell_size, &refs)
            }
        }
    }

    fn from_shape(shape: &TargetShape) -> TargetSpec {
        match shape {
            TargetShape::Polygon { vertices } => TargetSpec::Polygon {
                vertices: vertices.clone(),
            },
            TargetShape::Disc { center, radius } => TargetSpec::Disc {
                center: *center,
                radius: *radius,
            },
            TargetShape::Annulus {
                center,
                inner_radius,
                outer_radius,
            } => TargetSpec::Annulus {
                center: *center,
                inner_radius: *inner_radius,
                outer_radius: *outer_radius,
            },
            TargetShape::Mask {
                origin,
                cell_size,
                cells,
            } => TargetSpec::Mask {
                origin: *origin,
                cell_size: *cell_size,
                rows: cells
                    .iter()
                    .rev()
                    .map(|r| r.iter().map(|&c| if c { '#' } else { '.' }).collect())
                    .collect(),
            },
        }
    }
}

impl SceneFile {
    pub fn into_scene(self) -> Result<Scene> {
        let roi = RegionOfInterest::new(self.roi.x1, self.roi.x2, self.roi.y1, self.roi.y2)?;
        let tx = Array2D {
            position: self.tx.position,
            num_antennas: self.tx.antennas,
            role: ArrayRole::Transmit,
        };
        let mut rxs = Vec::with_capacity(self.rx.len());
        let mut fovs = Vec::with_capacity(self.rx.len());
        for (k, r) in self.rx.into_iter().enumerate() {
            rxs.push(Array2D {
                position: r.position,
                num_antennas: r.antennas,
                role: ArrayRole::Receive,
            });
            fovs.push(FieldOfView {
                receiver: k,
                blind_center: r.blind_center_deg.to_radians(),
                blind_width: r.blind_width_deg.to_radians(),
            });
        }
        // beta0 in dB is a power ratio; the path-loss model uses its square.
        let beta0 = 10f64.powf(self.beta0_db / 10.0);
        let scene = Scene {
            roi,
            targets: self
                .target
                .into_iter()
                .map(TargetSpec::into_shape)
                .collect(),
            tx,
            rxs,
            fovs,
            beta0_sq: beta0 * beta0,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn from_scene(scene: &Scene) -> SceneFile {
        SceneFile {
            beta0_db: 10.0 * scene.beta0_sq.sqrt().log10(),
            roi: scene.roi,
            tx: ArrayEntry {
                position: scene.tx.position,
                antennas: scene.tx.num_antennas,
                blind_center_deg: 0.0,
                blind_width_deg: 0.0,
            },
            rx: scene
                .rxs
                .iter()
                .zip(&scene.fovs)
                .map(|(r, f)| ArrayEntry {
                    position: r.position,
                    antennas: r.num_antennas,
                    blind_center_deg: f.blind_center.to_degrees(),
                    blind_width_deg: f.blind_width.to_degrees(),
                })
                .collect(),
            target: scene.targets.iter().map(TargetSpec::from_shape).collect(),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("scene file: {e}")))
    }
}
