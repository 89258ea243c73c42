//! Image scores, dictionary diagnostics and a matched-filter reference imager.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geometry::{sine_of_angle, steering_from_sine, Point, Scene};
use crate::numerics::{cdot, cnorm_sqr, frobenius, herm_mul, CMatrix};
use crate::raster::{RasterSpec, RegularRaster};
use crate::signal::{array_column, true_covariance, Pilot, ScattererCloud};
use crate::single_view::{model_covariance, threshold_support, Dictionary, GridModel};
use crate::{Error, Result};

/// Sidelobe-to-mainlobe ratio in dB, the mainlobe being every cell whose
/// center lies inside a target. Returns `+inf` without mainlobe energy and
/// `-inf` without sidelobe energy.
pub fn p_islr(image: &RegularRaster, scene: &Scene) -> Result<f64> {
    let truth = image.spec.truth_mask(scene);
    let (mut inside, mut outside) = (0.0, 0.0);
    for (v, t) in image.values.iter().zip(&truth) {
        if *t {
            inside += v;
        } else {
            outside += v;
        }
    }
    if inside == 0.0 && outside == 0.0 {
        return Err(Error::InvalidArgument("P-ISLR of an all-zero image".into()));
    }
    Ok(if inside == 0.0 {
        f64::INFINITY
    } else if outside == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (outside / inside).log10()
    })
}

/// Intersection over union of two cell sets.
pub fn iou_masks(estimate: &[bool], truth: &[bool]) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (a, b) in estimate.iter().zip(truth) {
        inter += (*a && *b) as usize;
        union += (*a || *b) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// IoU between the `fraction` cumulative-intensity support of `image` and the target cells.
pub fn iou(image: &RegularRaster, scene: &Scene, fraction: f64) -> f64 {
    iou_masks(
        &threshold_support(&image.values, fraction),
        &image.spec.truth_mask(scene),
    )
}

/// Largest normalised inner product between distinct dictionary columns.
pub fn coherence(dict: &Dictionary) -> f64 {
    let q = dict.len();
    let norms: Vec<f64> = (0..q).map(|i| cnorm_sqr(dict.column(i)).sqrt()).collect();
    (0..q)
        .into_par_iter()
        .map(|i| {
            let mut best: f64 = 0.0;
            for j in (i + 1)..q {
                let c = cdot(dict.column(i), dict.column(j)).norm() / (norms[i] * norms[j]);
                best = best.max(c);
            }
            best
        })
        .reduce(|| 0.0, f64::max)
        .min(1.0)
}

/// Coherence of the dictionary of receiver `k` at `positions`, using the
/// factorisation `|v^H v'| = |abar^H abar'| |b^H b'|` of Kronecker columns.
pub fn grid_coherence(scene: &Scene, pilot: &Pilot, k: usize, positions: &[Point]) -> Result<f64> {
    let tx = scene.tx.position;
    let rx = scene.rxs[k].position;
    let n_rx = scene.rxs[k].num_antennas;
    let mut abar = Vec::with_capacity(positions.len());
    let mut b = Vec::with_capacity(positions.len());
    for &p in positions {
        let mut a =
            pilot.transmit_response(&steering_from_sine(sine_of_angle(tx, p)?, pilot.n_tx()));
        let na = cnorm_sqr(&a).sqrt();
        a.iter_mut().for_each(|x| *x /= na);
        let mut r = steering_from_sine(sine_of_angle(rx, p)?, n_rx);
        let nr = cnorm_sqr(&r).sqrt();
        r.iter_mut().for_each(|x| *x /= nr);
        abar.push(a);
        b.push(r);
    }
    let q = positions.len();
    Ok((0..q)
        .into_par_iter()
        .map(|i| {
            let mut best: f64 = 0.0;
            for j in (i + 1)..q {
                let rb = cdot(&b[i], &b[j]).norm();
                if rb <= best {
                    continue;
                }
                best = best.max(rb * cdot(&abar[i], &abar[j]).norm());
            }
            best
        })
        .reduce(|| 0.0, f64::max)
        .min(1.0))
}

/// Norms describing how well the grid model reproduces the true covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationDiag {
    /// `|Sigma - Sigma_0|_F`
    pub model_gap: f64,
    /// `|Psi - P Psi_0 P|_F`
    pub projected_gap: f64,
    /// `|P_perp Psi_0|_F`
    pub orthogonal_energy: f64,
}

/// Orthogonal projector onto the span of the given columns.
fn span_projector(columns: &[&[Complex64]], n: usize) -> CMatrix {
    if columns.is_empty() {
        return CMatrix::zeros(n, n);
    }
    let a = CMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    let svd = a.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut p = CMatrix::zeros(n, n);
    for (j, s) in svd.singular_values.iter().enumerate() {
        if *s > 1e-10 * smax {
            let col = u.column(j);
            p += &col * col.adjoint();
        }
    }
    p
}

/// Decomposes the gap between the grid model and the true covariance of `cloud`.
/// `Psi` denotes a covariance without its noise term.
pub fn discretization_diag(
    grid: &GridModel,
    dict: &Dictionary,
    cloud: &ScattererCloud,
    pilot: &Pilot,
    scene: &Scene,
    k: usize,
    noise_variance: f64,
) -> Result<DiscretizationDiag> {
    let sigma = model_covariance(grid, dict, noise_variance);
    let sigma0 = true_covariance(cloud, pilot, scene, k, noise_variance)?;
    let n = sigma.nrows();
    let noise = CMatrix::from_diagonal_element(n, n, Complex64::new(noise_variance, 0.0));
    let psi = &sigma - &noise;
    let psi0 = &sigma0 - &noise;
    let active: Vec<&[Complex64]> = (0..grid.len())
        .filter(|&q| grid.gamma_r[q] > 0.0)
        .map(|q| dict.column(q))
        .collect();
    let p = span_projector(&active, n);
    let perp = CMatrix::identity(n, n) - &p;
    Ok(DiscretizationDiag {
        model_gap: frobenius(&(&sigma - &sigma0)),
        projected_gap: frobenius(&(&psi - &p * &psi0 * &p)),
        orthogonal_energy: frobenius(&(&perp * &psi0)),
    })
}

/// Unnormalised matched-filter image `v_p^H S v_p / |v_p|^4` at every cell center.
pub fn matched_filter_raw(
    shat: &CMatrix,
    scene: &Scene,
    pilot: &Pilot,
    k: usize,
    spec: RasterSpec,
) -> Result<Vec<f64>> {
    spec.centers()
        .into_par_iter()
        .map(|p| {
            let v = array_column(scene, pilot, k, p)?;
            let nv = cnorm_sqr(&v);
            Ok(cdot(&v, &herm_mul(shat, &v)).re / (nv * nv))
        })
        .collect()
}

/// Matched-filter image scaled to a maximum of 1.
pub fn matched_filter_baseline(
    shat: &CMatrix,
    scene: &Scene,
    pilot: &Pilot,
    k: usize,
    spec: RasterSpec,
) -> Result<RegularRaster> {
    let raw = matched_filter_raw(shat, scene, pilot, k, spec)?;
    let max = raw.iter().cloned().fold(0.0, f64::max);
    let vals = if max > 0.0 {
        raw.iter().map(|v| (v / max).max(0.0)).collect()
    } else {
        vec![0.0; raw.len()]
    };
    RegularRaster::from_values(spec, vals)
}

fn ser_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

fn de_db<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Db {
        Num(f64),
        Text(String),
    }
    match Db::deserialize(d)? {
        Db::Num(v) => Ok(v),
        Db::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Db::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
        Db::Text(t) => Err(serde::de::Error::custom(format!("invalid dB value {t:?}"))),
    }
}

/// Scores of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub label: String,
    #[serde(serialize_with = "ser_db", deserialize_with = "de_db")]
    pub p_islr_db: f64,
    pub iou: f64,
}

impl ImageScore {
    pub fn evaluate(
        label: &str,
        image: &RegularRaster,
        scene: &Scene,
        fraction: f64,
    ) -> Result<Self> {
        Ok(ImageScore {
            label: label.into(),
            p_islr_db: p_islr(image, scene)?,
            iou: iou(image, scene, fraction),
        })
    }
}

/// Scores of a run, serialised as `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub support_fraction: f64,
    /// Final fused image, or the single view when there is one receiver.
    pub primary: ImageScore,
    pub single_views: Vec<ImageScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<ImageScore>,
    /// Coherence of each receiver's final dictionary.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coherence: Vec<f64>,
    pub config: serde_json::Value,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(e.to_string()))
    }
}
