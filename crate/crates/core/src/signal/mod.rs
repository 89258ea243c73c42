//! Pilots, scatterer clouds and the per-receiver second-order statistics of
//! the received signal.

mod cloud;
mod covariance;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{sine_of_angle, steering_from_sine, Point, Scene};
use crate::numerics::CMatrix;
use crate::{Error, Result};

pub use cloud::{sample_cloud, ScattererCloud};
pub use covariance::{simulate_frames, true_covariance, SampleCovariance};

/// RNG stream reserved for pilot generation.
pub(crate) const PILOT_STREAM: u64 = 1 << 63;
/// RNG stream reserved for scatterer cloud sampling.
pub(crate) const CLOUD_STREAM: u64 = (1 << 63) + 1;

/// Seeded generator on a dedicated stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream used for frame `m` at receiver `k`.
pub fn frame_stream(k: usize, m: usize) -> u64 {
    ((k as u64) << 32) | m as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotKind {
    Orthogonal,
    RandomSphere,
}

/// Pilot matrix `X` of size `n_tx x l`; every row has squared norm `l * power`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pilot {
    pub matrix: CMatrix,
    pub power: f64,
    pub kind: PilotKind,
}

/// Builds a pilot. Orthogonal pilots use scaled DFT rows; random pilots draw
/// each row uniformly from the sphere of radius `sqrt(l * power)`.
pub fn make_pilot(kind: PilotKind, n_tx: usize, l: usize, power: f64, seed: u64) -> Result<Pilot> {
    if n_tx == 0 || l == 0 {
        return Err(Error::InvalidArgument(
            "pilot dimensions must be positive".into(),
        ));
    }
    if !(power > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pilot power must be positive, got {power}"
        )));
    }
    let matrix = match kind {
        PilotKind::Orthogonal => {
            if l < n_tx {
                return Err(Error::InvalidArgument(format!(
                    "orthogonal pilot needs l >= n_tx, got l = {l}, n_tx = {n_tx}"
                )));
            }
            let amp = power.sqrt();
            DMatrix::from_fn(n_tx, l, |n, t| {
                let phase = -2.0 * std::f64::consts::PI * ((n * t) % l) as f64 / l as f64;
                Complex64::from_polar(amp, phase)
            })
        }
        PilotKind::RandomSphere => {
            let mut rng = stream_rng(seed, PILOT_STREAM);
            let mut m = DMatrix::from_fn(n_tx, l, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            });
            let target = (l as f64 * power).sqrt();
            for n in 0..n_tx {
                let norm = (0..l).map(|t| m[(n, t)].norm_sqr()).sum::<f64>().sqrt();
                for t in 0..l {
                    m[(n, t)] *= target / norm;
                }
            }
            m
        }
    };
    Ok(Pilot {
        matrix,
        power,
        kind,
    })
}

impl Pilot {
    pub fn n_tx(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    /// `X^T a` for a transmit-side vector `a` of length `n_tx`.
    pub fn transmit_response(&self, a: &[Complex64]) -> Vec<Complex64> {
        let (n_tx, l) = self.matrix.shape();
        debug_assert_eq!(a.len(), n_tx);
        let data = self.matrix.as_slice();
        (0..l)
            .map(|t| {
                let col = &data[t * n_tx..(t + 1) * n_tx];
                col.iter().zip(a).map(|(x, ai)| x * ai).sum()
            })
            .collect()
    }
}

/// `abar (x) b`, laid out as `v[t * b.len() + r]`.
pub fn kron(abar: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(abar.len() * b.len());
    for &x in abar {
        v.extend(b.iter().map(|&y| x * y));
    }
    v
}

/// Virtual-array response `X^T a(phi) (x) b(theta)` of a scatterer at `p` seen by receiver `k`.
pub fn array_column(scene: &Scene, pilot: &Pilot, k: usize, p: Point) -> Result<Vec<Complex64>> {
    let s_tx = sine_of_angle(scene.tx.position, p)?;
    let s_rx = sine_of_angle(scene.rxs[k].position, p)?;
    let a = steering_from_sine(s_tx, pilot.n_tx());
    let b = steering_from_sine(s_rx, scene.rxs[k].num_antennas);
    Ok(kron(&pilot.transmit_response(&a), &b))
}

/// Noise power in watts from a PSD in dBm/Hz over `bandwidth_hz`.
pub fn noise_variance_from_psd(psd_dbm_per_hz: f64, bandwidth_hz: f64) -> f64 {
    10f64.powf((psd_dbm_per_hz + 10.0 * bandwidth_hz.log10() - 30.0) / 10.0)
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub(crate) fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram(p: &Pilot) -> CMatrix {
        &p.matrix * p.matrix.adjoint()
    }

    #[test]
    fn orthogonal_pilot_small() {
        let p = make_pilot(PilotKind::Orthogonal, 2, 2, 1.0, 0).unwrap();
        let g = gram(&p);
        assert!((g[(0, 0)].re - 2.0).abs() < 1e-14 && (g[(1, 1)].re - 2.0).abs() < 1e-14);
        assert!(g[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn orthogonal_pilot_gram_is_scaled_identity() {
        let p = make_pilot(PilotKind::Orthogonal, 16, 16, 0.01, 0).unwrap();
        let g = gram(&p);
        for i in 0..16 {
            for j in 0..16 {
                let want = if i == j { 16.0 * 0.01 } else { 0.0 };
                assert!((g[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn random_sphere_rows_have_fixed_norm() {
        let p = make_pilot(PilotKind::RandomSphere, 8, 12, 0.5, 9).unwrap();
        for n in 0..8 {
            let norm2: f64 = (0..12).map(|t| p.matrix[(n, t)].norm_sqr()).sum();
            assert!((norm2 - 12.0 * 0.5).abs() < 1e-12);
        }
        assert_eq!(
            p,
            make_pilot(PilotKind::RandomSphere, 8, 12, 0.5, 9).unwrap()
        );
    }

    #[test]
    fn orthogonal_needs_long_pilot() {
        assert!(matches!(
            make_pilot(PilotKind::Orthogonal, 4, 3, 1.0, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn noise_variance_examples() {
        let v = noise_variance_from_psd(-169.0, 1e6);
        assert!((v / 10f64.powf(-13.9) - 1.0).abs() < 1e-12);
        assert!((v - 1.2589e-14).abs() < 1e-17);
        assert!((noise_variance_from_psd(0.0, 1.0) - 1e-3).abs() < 1e-18);
        assert!((noise_variance_from_psd(-169.0, 1.0) / 10f64.powf(-19.9) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kron_layout() {
        let a = [Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)];
        let b = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(3.0, 0.0),
        ];
        let v = kron(&a, &b);
        assert_eq!(v.len(), 6);
        assert_eq!(v[3 + 1], Complex64::new(0.0, 2.0));
        assert_eq!(v[2], Complex64::new(3.0, 0.0));
    }

    #[test]
    fn transmit_response_matches_matrix_product() {
        let p = make_pilot(PilotKind::RandomSphere, 3, 5, 1.0, 1).unwrap();
        let a: Vec<Complex64> = (0..3)
            .map(|i| Complex64::from_polar(1.0, 0.3 * i as f64))
            .collect();
        let want = p.matrix.transpose() * nalgebra::DVector::from_column_slice(&a);
        let got = p.transmit_response(&a);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).norm() < 1e-14);
        }
    }
}
