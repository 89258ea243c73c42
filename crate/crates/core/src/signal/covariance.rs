use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use super::{array_column, complex_gaussian, frame_stream, stream_rng, Pilot, ScattererCloud};
use crate::geometry::{path_loss, Scene};
use crate::numerics::{add_outer, CMatrix};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SCOV";
const FORMAT_VERSION: u32 = 1;

/// Sample covariance of the vectorized received frames at one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCovariance {
    pub matrix: CMatrix,
    pub num_frames: usize,
    pub receiver: usize,
    pub seed: u64,
}

fn visible_terms(
    cloud: &ScattererCloud,
    pilot: &Pilot,
    scene: &Scene,
    k: usize,
) -> Result<Vec<(f64, Vec<Complex64>)>> {
    if k >= scene.num_receivers() {
        return Err(Error::InvalidArgument(format!(
            "receiver {k} does not exist"
        )));
    }
    let rx = scene.rxs[k].position;
    let mut out = Vec::new();
    for (i, &p) in cloud.points.iter().enumerate() {
        if !cloud.visible[k][i] || cloud.weights[i] == 0.0 {
            continue;
        }
        let var = cloud.weights[i] * path_loss(scene.tx.position, rx, p, scene.beta0_sq)?;
        out.push((var, array_column(scene, pilot, k, p)?));
    }
    Ok(out)
}

/// Covariance of the received vector: visible point contributions plus white noise.
pub fn true_covariance(
    cloud: &ScattererCloud,
    pilot: &Pilot,
    scene: &Scene,
    k: usize,
    noise_variance: f64,
) -> Result<CMatrix> {
    if cloud.is_empty() {
        return Err(Error::InvalidArgument("scatterer cloud is empty".into()));
    }
    let n = pilot.len() * scene.rxs.get(k).map_or(0, |r| r.num_antennas);
    let mut sigma = CMatrix::from_diagonal_element(n, n, Complex64::new(noise_variance, 0.0));
    for (var, v) in visible_terms(cloud, pilot, scene, k)? {
        add_outer(&mut sigma, &v, var);
    }
    Ok(sigma)
}

/// Simulates `m` frames at receiver `k` and returns their sample covariance.
///
/// Frame `j` draws from its own RNG stream: first one attenuation per visible
/// point, then the noise vector.
pub fn simulate_frames(
    cloud: &ScattererCloud,
    pilot: &Pilot,
    scene: &Scene,
    k: usize,
    noise_variance: f64,
    m: usize,
    seed: u64,
) -> Result<SampleCovariance> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "at least one frame is required".into(),
        ));
    }
    if !(noise_variance >= 0.0) {
        return Err(Error::InvalidArgument(
            "noise variance must be nonnegative".into(),
        ));
    }
    let terms = visible_terms(cloud, pilot, scene, k)?;
    let n = pilot.len() * scene.rxs[k].num_antennas;
    let mut s = CMatrix::zeros(n, n);
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for frame in 0..m {
        let mut rng = stream_rng(seed, frame_stream(k, frame));
        y.iter_mut().for_each(|e| *e = Complex64::new(0.0, 0.0));
        for (var, v) in &terms {
            let c = complex_gaussian(&mut rng, *var);
            for (yi, vi) in y.iter_mut().zip(v) {
                *yi += c * vi;
            }
        }
        for yi in y.iter_mut() {
            *yi += complex_gaussian(&mut rng, noise_variance);
        }
        add_outer(&mut s, &y, 1.0 / m as f64);
    }
    Ok(SampleCovariance {
        matrix: s,
        num_frames: m,
        receiver: k,
        seed,
    })
}

impl SampleCovariance {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Binary container: magic, version, rows, cols, frames, receiver, seed,
    /// then row-major interleaved real/imaginary little-endian `f64`s.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (rows, cols) = self.matrix.shape();
        let mut out = Vec::with_capacity(48 + rows * cols * 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for v in [
            rows as u64,
            cols as u64,
            self.num_frames as u64,
            self.receiver as u64,
            self.seed,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for r in 0..rows {
            for c in 0..cols {
                let z = self.matrix[(r, c)];
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let malformed = |reason: &str| Error::MalformedArtifact {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        if bytes.len() < 48 || &bytes[..4] != MAGIC {
            return Err(malformed("not a sample covariance container"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(malformed(&format!("unsupported version {version}")));
        }
        let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap());
        let (rows, cols) = (word(0) as usize, word(1) as usize);
        let (num_frames, receiver, seed) = (word(2) as usize, word(3) as usize, word(4));
        let body = &bytes[48..];
        if rows.checked_mul(cols).and_then(|e| e.checked_mul(16)) != Some(body.len()) {
            return Err(malformed("payload size does not match the header"));
        }
        let mut matrix = CMatrix::zeros(rows, cols);
        for (i, chunk) in body.chunks_exact(16).enumerate() {
            let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
            let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
            matrix[(i / cols, i % cols)] = Complex64::new(re, im);
        }
        Ok(SampleCovariance {
            matrix,
            num_frames,
            receiver,
            seed,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// `row,col,re,im` per entry.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("row,col,re,im\n");
        let (rows, cols) = self.matrix.shape();
        for r in 0..rows {
            for c in 0..cols {
                let z = self.matrix[(r, c)];
                writeln!(out, "{r},{c},{:e},{:e}", z.re, z.im).unwrap();
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}
