//! Planar geometry of the sensing network: positions, departure/arrival
//! angles, ULA steering vectors, two-hop path loss, target shapes and
//! per-receiver blind sectors.

mod scene;
mod shape;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use scene::{
    Array2D, ArrayEntry, ArrayRole, FieldOfView, RegionOfInterest, Scene, SceneFile, TargetSpec,
};
pub use shape::TargetShape;

/// A point (or displacement) in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// Angle of the line from `p` to the array at `origin`, with the
/// arctangent-plus-indicator convention: `atan((y0 - y)/(x0 - x)) + pi*1[x0 < x]`.
///
/// The result lies in `(-pi/2, 3pi/2]`.
fn line_angle(origin: Point, p: Point) -> Result<f64> {
    let dy = origin.y - p.y;
    let dx = origin.x - p.x;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::Domain(format!(
            "angle undefined: point ({}, {}) coincides with the array",
            p.x, p.y
        )));
    }
    // atan2 agrees with atan(dy/dx) for dx > 0 and differs by a multiple of
    // 2*pi otherwise; fold it into the convention's range.
    let mut angle = dy.atan2(dx);
    if angle <= -PI / 2.0 {
        angle += 2.0 * PI;
    }
    Ok(angle)
}

/// Angle of departure from the transmitter at `tx` towards `p`.
pub fn aod(tx: Point, p: Point) -> Result<f64> {
    line_angle(tx, p)
}

/// Angle of arrival at the receiver at `rx` from a scatterer at `p`.
pub fn aoa(rx: Point, p: Point) -> Result<f64> {
    line_angle(rx, p)
}

/// Half-wavelength ULA steering vector: element `i` is `exp(-j*pi*i*sin(angle))`.
pub fn steering(angle: f64, n: usize) -> Vec<Complex64> {
    steering_from_sine(angle.sin(), n)
}

/// Steering vector parameterised directly by the sine of the angle.
pub fn steering_from_sine(sine: f64, n: usize) -> Vec<Complex64> {
    let step = Complex64::from_polar(1.0, -PI * sine);
    let mut out = Vec::with_capacity(n);
    let mut cur = Complex64::new(1.0, 0.0);
    for i in 0..n {
        if i % 32 == 0 {
            // re-anchor to keep the recurrence from drifting on long arrays
            cur = Complex64::from_polar(1.0, -PI * sine * i as f64);
        }
        out.push(cur);
        cur *= step;
    }
    out
}

/// Transmit steering vector `a(phi)`.
pub fn steer_tx(phi: f64, n: usize) -> Vec<Complex64> {
    steering(phi, n)
}

/// Receive steering vector `b(theta)`.
pub fn steer_rx(theta: f64, n: usize) -> Vec<Complex64> {
    steering(theta, n)
}

/// Sine of the angle between `origin` and `p`; equals `sin` of [`aod`]/[`aoa`].
pub fn sine_of_angle(origin: Point, p: Point) -> Result<f64> {
    let d = origin.dist(p);
    if d == 0.0 {
        return Err(Error::Domain(format!(
            "angle undefined: point ({}, {}) coincides with the array",
            p.x, p.y
        )));
    }
    Ok((origin.y - p.y) / d)
}

/// Partial derivatives of `sin(angle(origin, p))` with respect to `p.x` and `p.y`.
pub fn sine_gradient(origin: Point, p: Point) -> Result<(f64, f64)> {
    let dx = origin.x - p.x;
    let dy = origin.y - p.y;
    let r2 = dx * dx + dy * dy;
    if r2 == 0.0 {
        return Err(Error::Domain(format!(
            "gradient undefined: point ({}, {}) coincides with the array",
            p.x, p.y
        )));
    }
    let r3 = r2 * r2.sqrt();
    Ok((dx * dy / r3, -(dx * dx) / r3))
}

/// Two-hop path loss `beta0_sq * |p - tx|^-2 * |p - rx|^-2`.
pub fn path_loss(tx: Point, rx: Point, p: Point, beta0_sq: f64) -> Result<f64> {
    let d_tx = p.dist_sq(tx);
    let d_rx = p.dist_sq(rx);
    if d_tx == 0.0 || d_rx == 0.0 {
        return Err(Error::Domain(format!(
            "path loss undefined: point ({}, {}) coincides with an array",
            p.x, p.y
        )));
    }
    Ok(beta0_sq / (d_tx * d_rx))
}

/// Gradient of [`path_loss`] with respect to the scatterer position.
pub fn path_loss_gradient(tx: Point, rx: Point, p: Point, beta0_sq: f64) -> Result<(f64, f64)> {
    let gb = path_loss(tx, rx, p, beta0_sq)?;
    let d_tx = p.dist_sq(tx);
    let d_rx = p.dist_sq(rx);
    let gx = -2.0 * gb * ((p.x - tx.x) / d_tx + (p.x - rx.x) / d_rx);
    let gy = -2.0 * gb * ((p.y - tx.y) / d_tx + (p.y - rx.y) / d_rx);
    Ok((gx, gy))
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Converts a level in dB (power ratio) into a linear factor.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts dBm into watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}
