use serde::{Deserialize, Serialize};

use super::Point;
use crate::{Error, Result};

/// Region occupied by one extended target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetShape {
    /// Simple polygon, vertices in order (either orientation).
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
    /// Boolean raster; `cells[row][col]`, row 0 is the bottom row starting at
    /// `origin` (lower-left corner).
    Mask {
        origin: Point,
        cell_size: f64,
        cells: Vec<Vec<bool>>,
    },
}

impl TargetShape {
    pub fn validate(&self) -> Result<()> {
        match self {
            TargetShape::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::InvalidArgument(
                        "polygon needs at least three vertices".into(),
                    ));
                }
                if !polygon_is_simple(vertices) {
                    return Err(Error::InvalidArgument("polygon is not simple".into()));
                }
            }
            TargetShape::Disc { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidArgument(
                        "disc radius must be positive".into(),
                    ));
                }
            }
            TargetShape::Annulus {
                inner_radius,
                outer_radius,
                ..
            } => {
                if !(*inner_radius >= 0.0 && inner_radius < outer_radius) {
                    return Err(Error::InvalidArgument(
                        "annulus needs 0 <= inner radius < outer radius".into(),
                    ));
                }
            }
            TargetShape::Mask {
                cell_size, cells, ..
            } => {
                if !(*cell_size > 0.0) {
                    return Err(Error::InvalidArgument(
                        "mask cell size must be positive".into(),
                    ));
                }
                if cells.is_empty() || cells.iter().any(|r| r.len() != cells[0].len()) {
                    return Err(Error::InvalidArgument(
                        "mask rows must be non-empty and of equal length".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Point-in-shape test. Boundaries count as inside for discs, annuli and masks.
    pub fn contains(&self, p: Point) -> bool {
        match self {
            TargetShape::Polygon { vertices } => point_in_polygon(vertices, p),
            TargetShape::Disc { center, radius } => p.dist_sq(*center) <= radius * radius,
            TargetShape::Annulus {
                center,
                inner_radius,
                outer_radius,
            } => {
                let d2 = p.dist_sq(*center);
                d2 >= inner_radius * inner_radius && d2 <= outer_radius * outer_radius
            }
            TargetShape::Mask {
                origin,
                cell_size,
                cells,
            } => {
                let col = ((p.x - origin.x) / cell_size).floor();
                let row = ((p.y - origin.y) / cell_size).floor();
                if col < 0.0 || row < 0.0 {
                    return false;
                }
                let (row, col) = (row as usize, col as usize);
                cells
                    .get(row)
                    .and_then(|r| r.get(col))
                    .copied()
                    .unwrap_or(false)
            }
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            TargetShape::Polygon { vertices } => {
                let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
                let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                for v in vertices {
                    lo.x = lo.x.min(v.x);
                    lo.y = lo.y.min(v.y);
                    hi.x = hi.x.max(v.x);
                    hi.y = hi.y.max(v.y);
                }
                (lo, hi)
            }
            TargetShape::Disc { center, radius } => (
                Point::new(center.x - radius, center.y - radius),
                Point::new(center.x + radius, center.y + radius),
            ),
            TargetShape::Annulus {
                center,
                outer_radius,
                ..
            } => (
                Point::new(center.x - outer_radius, center.y - outer_radius),
                Point::new(center.x + outer_radius, center.y + outer_radius),
            ),
            TargetShape::Mask {
                origin,
                cell_size,
                cells,
            } => (
                *origin,
                Point::new(
                    origin.x + cell_size * cells[0].len() as f64,
                    origin.y + cell_size * cells.len() as f64,
                ),
            ),
        }
    }

    /// Builds a mask from text rows drawn top-down, `#` marking filled cells.
    pub fn mask_from_rows(origin: Point, cell_size: f64, rows_top_down: &[&str]) -> TargetShape {
        let cells = rows_top_down
            .iter()
            .rev()
            .map(|r| r.chars().map(|c| c == '#').collect())
            .collect();
        TargetShape::Mask {
            origin,
            cell_size,
            cells,
        }
    }
}

fn point_in_polygon(vertices: &[Point], p: Point) -> bool {
    // even-odd crossing rule
    let mut inside = false;
    let n = vertices.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn segments_intersect(p1: Point, p2: Point, p3: Point, p4: Point) -> bool {
    let d1 = cross(p3, p4, p1);
    let d2 = cross(p3, p4, p2);
    let d3 = cross(p1, p2, p3);
    let d4 = cross(p1, p2, p4);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn polygon_is_simple(vertices: &[Point]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        let (a1, a2) = (vertices[i], vertices[(i + 1) % n]);
        if a1 == a2 {
            return false;
        }
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (b1, b2) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_center_inside() {
        let d = TargetShape::Disc {
            center: Point::new(5.0, 5.0),
            radius: 2.0,
        };
        assert!(d.contains(Point::new(5.0, 5.0)));
        assert!(!d.contains(Point::new(7.1, 5.0)));
    }

    #[test]
    fn annulus_hole_is_outside() {
        let a = TargetShape::Annulus {
            center: Point::new(0.0, 0.0),
            inner_radius: 1.0,
            outer_radius: 2.0,
        };
        assert!(!a.contains(Point::new(0.0, 0.5)));
        assert!(a.contains(Point::new(0.0, 1.5)));
        assert!(!a.contains(Point::new(2.5, 0.0)));
    }

    #[test]
    fn unit_square_polygon() {
        let sq = TargetShape::Polygon {
            vertices: vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(0.0, 1.0),
            ],
        };
        sq.validate().unwrap();
        assert!(sq.contains(Point::new(0.5, 0.5)));
        assert!(!sq.contains(Point::new(1.5, 0.5)));
    }

    #[test]
    fn bow_tie_is_not_simple() {
        let bow = TargetShape::Polygon {
            vertices: vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
            ],
        };
        assert!(bow.validate().is_err());
    }

    #[test]
    fn annulus_radii_validated() {
        let a = TargetShape::Annulus {
            center: Point::new(0.0, 0.0),
            inner_radius: 2.0,
            outer_radius: 1.0,
        };
        assert!(a.validate().is_err());
    }

    #[test]
    fn mask_lookup_uses_bottom_up_rows() {
        let m = TargetShape::mask_from_rows(Point::new(1.0, 1.0), 0.5, &["#.", ".."]);
        // top row (drawn first) is row index 1
        assert!(m.contains(Point::new(1.2, 1.7)));
        assert!(!m.contains(Point::new(1.2, 1.2)));
        assert!(!m.contains(Point::new(0.9, 1.7)));
        assert!(!m.contains(Point::new(2.1, 1.7)));
    }
}
