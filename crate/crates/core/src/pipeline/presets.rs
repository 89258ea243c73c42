use std::f64::consts::PI;

use super::{RunConfig, Stage};
use crate::geometry::{ArrayEntry, Point, RegionOfInterest, SceneFile, TargetSpec};
use crate::{Error, Result};

pub const PRESET_NAMES: [&str; 4] = ["fig2", "fig4", "fig5", "table1_col2"];

pub const TX_POSITION: Point = Point { x: -3.0, y: 7.5 };
pub const RX_POSITIONS: [Point; 3] = [
    Point { x: 18.0, y: 7.5 },
    Point { x: 7.5, y: 18.0 },
    Point { x: 7.5, y: -3.0 },
];
pub const BETA0_DB: f64 = -35.0;
pub const NOISE_PSD_DBM_HZ: f64 = -169.0;
pub const BANDWIDTH_HZ: f64 = 1e6;

fn rx(p: Point, blind_center: f64, blind_width: f64) -> ArrayEntry {
    ArrayEntry {
        position: p,
        antennas: 1,
        blind_center_deg: blind_center.to_degrees(),
        blind_width_deg: blind_width.to_degrees(),
    }
}

fn bearing(from: Point, to: Point) -> f64 {
    (to.y - from.y).atan2(to.x - from.x)
}

/// Reference geometry with the chosen receivers and targets.
pub fn reference_scene(
    receivers: &[usize],
    targets: Vec<TargetSpec>,
    blind: Option<(BlindCenter, f64)>,
) -> SceneFile {
    let roi = RegionOfInterest {
        x1: 0.0,
        x2: 15.0,
        y1: 0.0,
        y2: 15.0,
    };
    let rx = receivers
        .iter()
        .map(|&k| {
            let p = RX_POSITIONS[k];
            match blind {
                None => rx(p, 0.0, 0.0),
                Some((BlindCenter::Boresight, w)) => rx(p, bearing(p, roi.center()), w),
                Some((BlindCenter::Transmitter, w)) => rx(p, bearing(p, TX_POSITION), w),
            }
        })
        .collect();
    SceneFile {
        beta0_db: BETA0_DB,
        roi,
        tx: ArrayEntry {
            position: TX_POSITION,
            antennas: 1,
            blind_center_deg: 0.0,
            blind_width_deg: 0.0,
        },
        rx,
        target: targets,
    }
}

/// Where a receiver's blind sector points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlindCenter {
    /// Toward the center of the region of interest.
    Boresight,
    /// Toward the transmitter.
    Transmitter,
}

pub fn triangle_and_circle() -> Vec<TargetSpec> {
    vec![
        TargetSpec::Polygon {
            vertices: vec![
                Point::new(2.5, 2.5),
                Point::new(8.0, 2.5),
                Point::new(5.25, 7.5),
            ],
        },
        TargetSpec::Disc {
            center: Point::new(10.0, 10.5),
            radius: 2.5,
        },
    ]
}

pub fn annulus() -> Vec<TargetSpec> {
    vec![TargetSpec::Annulus {
        center: Point::new(7.5, 7.5),
        inner_radius: 2.0,
        outer_radius: 4.0,
    }]
}

fn glyph(c: char) -> [&'static str; 7] {
    match c {
        'I' => [
            "#####", "..#..", "..#..", "..#..", "..#..", "..#..", "#####",
        ],
        'S' => [
            ".####", "#....", "#....", ".###.", "....#", "....#", "####.",
        ],
        'A' => [
            ".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#",
        ],
        'C' => [
            ".####", "#....", "#....", "#....", "#....", "#....", ".####",
        ],
        _ => ["#####"; 7],
    }
}

/// Four 5x7 bitmap letters in a 2x2 layout, reading row by row.
pub fn letters(word: &str, cell: f64) -> Vec<TargetSpec> {
    let origins = [
        Point::new(2.0, 8.25),
        Point::new(9.25, 8.25),
        Point::new(2.0, 1.5),
        Point::new(9.25, 1.5),
    ];
    word.chars()
        .zip(origins)
        .map(|(c, origin)| TargetSpec::Mask {
            origin,
            cell_size: cell,
            rows: glyph(c).iter().map(|r| r.to_string()).collect(),
        })
        .collect()
}

/// Built-in scenario configurations.
pub fn preset(name: &str) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    c.noise_psd_dbm_hz = NOISE_PSD_DBM_HZ;
    c.bandwidth_hz = BANDWIDTH_HZ;
    c.frames = 20;
    c.raster = [60, 60];
    match name {
        "fig2" => {
            c.scene = Some(reference_scene(&[0], triangle_and_circle(), None));
            (c.n_tx, c.n_rx, c.l) = (16, 16, 16);
            c.power_dbm = 10.0;
            c.phase1.q = 400;
        }
        "fig4" => {
            c.scene = Some(reference_scene(&[1], annulus(), None));
            (c.n_tx, c.n_rx, c.l) = (8, 8, 8);
            c.power_dbm = 10.0;
            c.phase1.q = 900;
        }
        "fig5" => {
            c.scene = Some(reference_scene(
                &[0, 1, 2],
                triangle_and_circle(),
                Some((BlindCenter::Boresight, PI / 8.0)),
            ));
            (c.n_tx, c.n_rx, c.l) = (8, 8, 8);
            c.power_dbm = 0.0;
            c.phase1.q = 900;
        }
        "table1_col2" => {
            c.scene = Some(reference_scene(
                &[0, 1, 2],
                letters("ISAC", 0.75),
                Some((BlindCenter::Transmitter, PI / 5.0)),
            ));
            (c.n_tx, c.n_rx, c.l) = (12, 12, 12);
            c.power_dbm = 10.0;
            c.phase1.q = 900;
            c.fusion.eta_ratio = 0.1;
            c.stages = Stage::ALL.to_vec();
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    }
    c.out = format!("runs/{name}").into();
    Ok(c)
}
