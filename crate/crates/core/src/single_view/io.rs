use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GridModel, Phase1Config, Phase1Result};
use crate::geometry::{Point, RegionOfInterest};
use crate::{Error, Result};

/// Run metadata stored next to the positions and intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase1Meta {
    pub receiver: usize,
    pub seed: u64,
    pub config: Phase1Config,
    pub eta: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_cost: f64,
    pub d_max: f64,
    pub roi: RegionOfInterest,
    pub adjacency: Vec<(usize, usize)>,
}

fn paths(dir: &Path, k: usize) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("positions_rx{k}.csv")),
        dir.join(format!("intensities_rx{k}.csv")),
        dir.join(format!("phase1_rx{k}.json")),
    )
}

/// Writes `positions_rx{k}.csv`, `intensities_rx{k}.csv` and `phase1_rx{k}.json` into `dir`.
pub fn write_phase1(
    dir: &Path,
    k: usize,
    seed: u64,
    config: &Phase1Config,
    result: &Phase1Result,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (pos_path, int_path, meta_path) = paths(dir, k);
    let g = &result.grid;
    let mut pos = String::from("q,x,y,x0,y0\n");
    for (q, (p, p0)) in g.positions.iter().zip(&g.initial_positions).enumerate() {
        writeln!(pos, "{q},{:e},{:e},{:e},{:e}", p.x, p.y, p0.x, p0.y).unwrap();
    }
    let mut int = String::from("q,gamma_r,gamma_beta\n");
    for (q, (r, b)) in g.gamma_r.iter().zip(&g.gamma_beta).enumerate() {
        writeln!(int, "{q},{r:e},{b:e}").unwrap();
    }
    let meta = Phase1Meta {
        receiver: k,
        seed,
        config: config.clone(),
        eta: result.eta,
        iterations: result.iterations,
        converged: result.converged,
        final_cost: result.final_cost,
        d_max: g.d_max,
        roi: g.roi,
        adjacency: g.adjacency.clone(),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Numeric(e.to_string()))?;
    fs::write(&pos_path, pos).map_err(|e| Error::io(&pos_path, e))?;
    fs::write(&int_path, int).map_err(|e| Error::io(&int_path, e))?;
    fs::write(&meta_path, json).map_err(|e| Error::io(&meta_path, e))?;
    Ok(vec![pos_path, int_path, meta_path])
}

fn read_rows(path: &Path, cols: usize, stage: &str) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact {
            path: path.to_path_buf(),
            stage: stage.into(),
        },
        _ => Error::io(path, e),
    })?;
    let malformed = |reason: String| Error::MalformedArtifact {
        path: path.to_path_buf(),
        reason,
    };
    let mut rows = Vec::new();
    for (i, line) in text.lines().skip(1).enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| malformed(format!("line {}: {e}", i + 2)))?;
        if vals.len() != cols || vals[0] as usize != rows.len() {
            return Err(malformed(format!("line {}: unexpected layout", i + 2)));
        }
        rows.push(vals);
    }
    Ok(rows)
}

/// Reads back the grid model and metadata written by [`write_phase1`].
pub fn read_phase1(dir: &Path, k: usize) -> Result<(GridModel, Phase1Meta)> {
    let (pos_path, int_path, meta_path) = paths(dir, k);
    let text = fs::read_to_string(&meta_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact {
            path: meta_path.clone(),
            stage: "image".into(),
        },
        _ => Error::io(&meta_path, e),
    })?;
    let meta: Phase1Meta = serde_json::from_str(&text).map_err(|e| Error::MalformedArtifact {
        path: meta_path.clone(),
        reason: e.to_string(),
    })?;
    let pos = read_rows(&pos_path, 5, "image")?;
    let int = read_rows(&int_path, 3, "image")?;
    if pos.len() != int.len() {
        return Err(Error::MalformedArtifact {
            path: int_path,
            reason: "row count differs from the positions file".into(),
        });
    }
    let grid = GridModel::from_parts(
        pos.iter().map(|r| Point::new(r[1], r[2])).collect(),
        pos.iter().map(|r| Point::new(r[3], r[4])).collect(),
        int.iter().map(|r| r[1]).collect(),
        int.iter().map(|r| r[2]).collect(),
        meta.adjacency.clone(),
        meta.d_max,
        meta.roi,
    );
    Ok((grid, meta))
}
