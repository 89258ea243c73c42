//! End-to-end runs: configuration, stage orchestration and artifacts.
//!
//! Every stage reads its inputs from the output directory and writes its
//! results there, so stages can be rerun independently.

mod presets;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fusion::{run_fusion, FusionConfig, FusionInputs, FusionResult};
use crate::geometry::{dbm_to_watts, Scene, SceneFile};
use crate::interp::{interpolate, EPConfig};
use crate::metrics::{grid_coherence, matched_filter_baseline, ImageScore, MetricsReport};
use crate::raster::{RasterSpec, RegularRaster};
use crate::signal::{
    make_pilot, noise_variance_from_psd, sample_cloud, simulate_frames, Pilot, PilotKind,
    SampleCovariance,
};
use crate::single_view::{read_phase1, run_phase1, write_phase1, Phase1Config, Phase1Problem};
use crate::{Error, Result};

pub use presets::{
    annulus, letters, preset, reference_scene, triangle_and_circle, BlindCenter, BANDWIDTH_HZ,
    BETA0_DB, NOISE_PSD_DBM_HZ, PRESET_NAMES, RX_POSITIONS, TX_POSITION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Simulate,
    Phase1,
    Interp,
    Fuse,
    Baseline,
    Score,
}

impl Stage {
    /// Execution order.
    pub const ALL: [Stage; 6] = [
        Stage::Simulate,
        Stage::Phase1,
        Stage::Interp,
        Stage::Fuse,
        Stage::Baseline,
        Stage::Score,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Phase1 => "phase1",
            Stage::Interp => "interp",
            Stage::Fuse => "fuse",
            Stage::Baseline => "baseline",
            Stage::Score => "score",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Stage> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

/// Parses a comma-separated stage list such as `simulate,phase1`.
pub fn parse_stages(s: &str) -> Result<Vec<Stage>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(Stage::from_str)
        .collect()
}

fn default_stages() -> Vec<Stage> {
    vec![
        Stage::Simulate,
        Stage::Phase1,
        Stage::Interp,
        Stage::Fuse,
        Stage::Score,
    ]
}

/// Everything that defines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub stages: Vec<Stage>,
    /// Threads for the per-receiver stages; `None` uses one per receiver.
    pub workers: Option<usize>,
    /// Scene file, resolved relative to the config file.
    pub scene_file: Option<PathBuf>,
    pub n_tx: usize,
    pub n_rx: usize,
    pub l: usize,
    pub frames: usize,
    pub power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub pilot: PilotKind,
    /// Scatterer sampling density, points per square meter.
    pub density: f64,
    /// Common raster size `[nx, ny]`.
    pub raster: [usize; 2],
    /// Cumulative-intensity fraction defining an image's support.
    pub support_fraction: f64,
    /// Inline scene, used when `scene_file` is absent.
    pub scene: Option<SceneFile>,
    pub phase1: Phase1Config,
    pub ep: EPConfig,
    pub fusion: FusionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            out: PathBuf::from("runs/default"),
            stages: default_stages(),
            workers: None,
            scene_file: None,
            n_tx: 16,
            n_rx: 16,
            l: 16,
            frames: 20,
            power_dbm: 10.0,
            noise_psd_dbm_hz: NOISE_PSD_DBM_HZ,
            bandwidth_hz: BANDWIDTH_HZ,
            pilot: PilotKind::Orthogonal,
            density: 200.0,
            raster: [60, 60],
            support_fraction: 0.95,
            scene: None,
            phase1: Phase1Config::default(),
            ep: EPConfig::default(),
            fusion: FusionConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; a relative `scene_file` is taken relative to it.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(sf) = &c.scene_file {
            if sf.is_relative() {
                c.scene_file = Some(path.parent().unwrap_or(Path::new(".")).join(sf));
            }
        }
        Ok(c)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.n_tx == 0 || self.n_rx == 0 || self.l == 0 || self.frames == 0 {
            return bad("antenna counts, pilot length and frame count must be positive");
        }
        if self.raster[0] == 0 || self.raster[1] == 0 {
            return bad("raster dimensions must be positive");
        }
        if !(self.density > 0.0)
            || !self.power_dbm.is_finite()
            || !self.noise_psd_dbm_hz.is_finite()
        {
            return bad("density must be positive and powers finite");
        }
        if !(self.bandwidth_hz > 0.0) {
            return bad("bandwidth must be positive");
        }
        if !(self.support_fraction > 0.0 && self.support_fraction <= 1.0) {
            return bad("support fraction must lie in (0, 1]");
        }
        if self.workers == Some(0) {
            return bad("worker count must be positive");
        }
        if self.stages.is_empty() {
            return bad("no stages selected");
        }
        if self.pilot == PilotKind::Orthogonal && self.l < self.n_tx {
            return bad("orthogonal pilots need l >= n_tx");
        }
        if self.scene.is_none() && self.scene_file.is_none() {
            return bad("either scene_file or an inline [scene] is required");
        }
        self.phase1.validate()?;
        self.ep.validate(&self.raster_spec_unchecked())?;
        self.fusion.validate()?;
        Ok(())
    }

    fn raster_spec_unchecked(&self) -> RasterSpec {
        let roi = self.scene.as_ref().map_or(
            crate::geometry::RegionOfInterest {
                x1: 0.0,
                x2: 1.0,
                y1: 0.0,
                y2: 1.0,
            },
            |s| s.roi,
        );
        RasterSpec {
            nx: self.raster[0],
            ny: self.raster[1],
            roi,
        }
    }

    /// Scene with the configured antenna counts.
    pub fn load_scene(&self) -> Result<Scene> {
        let file = match (&self.scene_file, &self.scene) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                toml::from_str::<SceneFile>(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            (None, Some(s)) => s.clone(),
            (None, None) => return Err(Error::Config("no scene given".into())),
        };
        Ok(file.into_scene()?.with_antennas(self.n_tx, self.n_rx))
    }

    pub fn noise_variance(&self) -> f64 {
        noise_variance_from_psd(self.noise_psd_dbm_hz, self.bandwidth_hz)
    }

    pub fn pilot(&self) -> Result<Pilot> {
        make_pilot(
            self.pilot,
            self.n_tx,
            self.l,
            dbm_to_watts(self.power_dbm),
            self.seed,
        )
    }

    /// Config echo stored in reports: everything that affects the numbers.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).unwrap_or(serde_json::Value::Null);
        if let Some(map) = v.as_object_mut() {
            for key in ["out", "stages", "workers"] {
                map.remove(key);
            }
        }
        v
    }
}

/// Artifacts and timing of one executed stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    /// Paths relative to the output directory.
    pub artifacts: Vec<PathBuf>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub out: PathBuf,
    pub config: RunConfig,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn artifacts(&self) -> impl Iterator<Item = PathBuf> + '_ {
        self.stages
            .iter()
            .flat_map(|s| s.artifacts.iter().map(|a| self.out.join(a)))
    }

    pub fn record(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == stage)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.json";

pub fn covariance_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("covariance_rx{k}.bin"))
}

pub fn image_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("image_rx{k}.csv"))
}

pub fn fused_path(dir: &Path) -> PathBuf {
    dir.join("fused.csv")
}

pub fn baseline_path(dir: &Path) -> PathBuf {
    dir.join("baseline.csv")
}

fn require(path: &Path, stage: Stage) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            stage: stage.name().into(),
        })
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numeric(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn write_image(raster: &RegularRaster, csv: &Path) -> Result<Vec<PathBuf>> {
    let pgm = csv.with_extension("pgm");
    raster.write_csv(csv)?;
    raster.write_pgm(&pgm)?;
    Ok(vec![csv.to_path_buf(), pgm])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InterpMeta {
    receiver: usize,
    sigma_ep_sq: f64,
    degenerate_fits: usize,
    fallback_cells: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FusionMeta {
    mu: f64,
    eta: f64,
    iterations: usize,
    converged: bool,
}

/// Resolved inputs shared by all stages of a run.
pub struct Runner {
    pub config: RunConfig,
    pub scene: Scene,
    pub pilot: Pilot,
    pub noise: f64,
    pub spec: RasterSpec,
    pub dir: PathBuf,
    pool: rayon::ThreadPool,
}

impl Runner {
    pub fn new(config: RunConfig) -> Result<Runner> {
        config.validate()?;
        let scene = config.load_scene()?;
        let pilot = config.pilot()?;
        let spec = RasterSpec::new(config.raster[0], config.raster[1], scene.roi)?;
        let workers = config.workers.unwrap_or(scene.num_receivers());
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Runner {
            noise: config.noise_variance(),
            dir: config.out.clone(),
            config,
            scene,
            pilot,
            spec,
            pool,
        })
    }

    pub fn num_receivers(&self) -> usize {
        self.scene.num_receivers()
    }

    fn per_receiver<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        let k = self.num_receivers();
        self.pool
            .install(|| (0..k).into_par_iter().map(f).collect())
    }

    /// Runs the selected stages in dependency order.
    pub fn run(&self) -> Result<RunManifest> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let config_path = self.dir.join("config.toml");
        fs::write(&config_path, self.config.to_toml_string()?)
            .map_err(|e| Error::io(&config_path, e))?;
        let scene_path = self.dir.join("scene.toml");
        fs::write(
            &scene_path,
            SceneFile::from_scene(&self.scene).to_toml_string()?,
        )
        .map_err(|e| Error::io(&scene_path, e))?;
        let mut records = Vec::new();
        for stage in Stage::ALL {
            if !self.config.stages.contains(&stage) {
                continue;
            }
            let t = Instant::now();
            info!("stage {stage} started");
            let paths = self.run_stage(stage)?;
            let wall = t.elapsed().as_secs_f64();
            info!(
                "stage {stage} finished in {wall:.2} s ({} artifacts)",
                paths.len()
            );
            records.push(StageRecord {
                stage,
                artifacts: paths
                    .iter()
                    .map(|p| p.strip_prefix(&self.dir).unwrap_or(p).to_path_buf())
                    .collect(),
                wall_seconds: wall,
            });
        }
        let manifest = RunManifest {
            version: crate::VERSION.into(),
            out: self.dir.clone(),
            config: self.config.clone(),
            stages: records,
        };
        write_json(&self.dir.join(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    }

    pub fn run_stage(&self, stage: Stage) -> Result<Vec<PathBuf>> {
        match stage {
            Stage::Simulate => self.simulate(),
            Stage::Phase1 => self.phase1(),
            Stage::Interp => self.interp(),
            Stage::Fuse => self.fuse(),
            Stage::Baseline => self.baseline(),
            Stage::Score => self.score(),
        }
    }

    fn simulate(&self) -> Result<Vec<PathBuf>> {
        let cloud = sample_cloud(&self.scene, self.config.density, self.config.seed)?;
        info!("sampled {} scatterers", cloud.len());
        self.per_receiver(|k| {
            let s = simulate_frames(
                &cloud,
                &self.pilot,
                &self.scene,
                k,
                self.noise,
                self.config.frames,
                self.config.seed,
            )?;
            let path = covariance_path(&self.dir, k);
            s.write(&path)?;
            Ok(path)
        })
    }

    pub fn read_covariance(&self, k: usize) -> Result<SampleCovariance> {
        let path = covariance_path(&self.dir, k);
        require(&path, Stage::Simulate)?;
        SampleCovariance::read(&path)
    }

    fn phase1(&self) -> Result<Vec<PathBuf>> {
        let nested = self.per_receiver(|k| {
            let shat = self.read_covariance(k)?;
            let problem =
                Phase1Problem::new(&self.scene, &self.pilot, k, self.noise, &shat.matrix)?;
            let t = Instant::now();
            let result = run_phase1(&problem, &self.config.phase1, self.config.seed)?;
            info!(
                "receiver {k}: {} iterations, converged = {}, cost {:.6e}, {:.1} s",
                result.iterations,
                result.converged,
                result.final_cost,
                t.elapsed().as_secs_f64()
            );
            let mut paths =
                write_phase1(&self.dir, k, self.config.seed, &self.config.phase1, &result)?;
            if self.config.phase1.record_trace {
                let path = self.dir.join(format!("phase1_trace_rx{k}.csv"));
                let mut text = String::from("iteration,stage,cost\n");
                for e in &result.trace {
                    let stage =
                        serde_json::to_value(e.stage).map_err(|e| Error::Numeric(e.to_string()))?;
                    text.push_str(&format!(
                        "{},{},{:e}\n",
                        e.iteration,
                        stage.as_str().unwrap_or(""),
                        e.cost
                    ));
                }
                fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                paths.push(path);
            }
            Ok(paths)
        })?;
        Ok(nested.into_iter().flatten().collect())
    }

    fn interp(&self) -> Result<Vec<PathBuf>> {
        let nested = self.per_receiver(|k| {
            let (grid, _) = read_phase1(&self.dir, k)?;
            let out = interpolate(&grid.positions, &grid.gamma_r, self.spec, &self.config.ep)?;
            let mut paths = write_image(&out.raster, &image_path(&self.dir, k))?;
            let meta_path = self.dir.join(format!("interp_rx{k}.json"));
            write_json(
                &meta_path,
                &InterpMeta {
                    receiver: k,
                    sigma_ep_sq: out.sigma_ep_sq,
                    degenerate_fits: out.degenerate_fits,
                    fallback_cells: out.fallback_cells,
                },
            )?;
            paths.push(meta_path);
            Ok(paths)
        })?;
        Ok(nested.into_iter().flatten().collect())
    }

    pub fn read_image(&self, k: usize) -> Result<RegularRaster> {
        let path = image_path(&self.dir, k);
        require(&path, Stage::Interp)?;
        RegularRaster::read_csv(&path, self.spec)
    }

    pub fn fuse_rasters(
        &self,
        rasters: Vec<RegularRaster>,
        config: &FusionConfig,
    ) -> Result<FusionResult> {
        let inputs = FusionInputs::from_scene(&self.scene, rasters)?;
        let result = self.pool.install(|| run_fusion(&inputs, config))?;
        info!(
            "fusion: {} outer iterations, converged = {}, mu = {:.3e}, eta = {:.3e}",
            result.iterations, result.converged, result.mu, result.eta
        );
        Ok(result)
    }

    fn fuse(&self) -> Result<Vec<PathBuf>> {
        if self.num_receivers() < 2 {
            info!("single receiver: nothing to fuse");
            return Ok(Vec::new());
        }
        let rasters = (0..self.num_receivers())
            .map(|k| self.read_image(k))
            .collect::<Result<Vec<_>>>()?;
        let result = self.fuse_rasters(rasters, &self.config.fusion)?;
        let mut paths = write_image(&result.raster(self.spec)?, &fused_path(&self.dir))?;
        paths.extend(result.write_lambda(&self.dir, self.spec)?);
        let trace = self.dir.join("fusion_trace.csv");
        fs::write(&trace, result.trace_csv()).map_err(|e| Error::io(&trace, e))?;
        let meta = self.dir.join("fusion.json");
        write_json(
            &meta,
            &FusionMeta {
                mu: result.mu,
                eta: result.eta,
                iterations: result.iterations,
                converged: result.converged,
            },
        )?;
        paths.push(trace);
        paths.push(meta);
        Ok(paths)
    }

    /// Matched-filter images per receiver, fused like the proposed scheme when there are several.
    fn baseline(&self) -> Result<Vec<PathBuf>> {
        let singles = self.per_receiver(|k| {
            let shat = self.read_covariance(k)?;
            matched_filter_baseline(&shat.matrix, &self.scene, &self.pilot, k, self.spec)
        })?;
        let mut paths = Vec::new();
        for (k, r) in singles.iter().enumerate() {
            paths.extend(write_image(
                r,
                &self.dir.join(format!("baseline_rx{k}.csv")),
            )?);
        }
        let combined = if singles.len() > 1 {
            self.fuse_rasters(singles, &self.config.fusion)?
                .raster(self.spec)?
        } else {
            singles.into_iter().next().expect("scene has a receiver")
        };
        paths.extend(write_image(&combined, &baseline_path(&self.dir))?);
        Ok(paths)
    }

    fn score(&self) -> Result<Vec<PathBuf>> {
        let frac = self.config.support_fraction;
        let k_total = self.num_receivers();
        let mut single_views = Vec::with_capacity(k_total);
        let mut coherence = Vec::with_capacity(k_total);
        for k in 0..k_total {
            let img = self.read_image(k)?;
            single_views.push(ImageScore::evaluate(
                &format!("rx{k}"),
                &img,
                &self.scene,
                frac,
            )?);
            let (grid, _) = read_phase1(&self.dir, k)?;
            coherence.push(grid_coherence(
                &self.scene,
                &self.pilot,
                k,
                &grid.positions,
            )?);
        }
        let primary = if k_total > 1 {
            let path = fused_path(&self.dir);
            require(&path, Stage::Fuse)?;
            ImageScore::evaluate(
                "fused",
                &RegularRaster::read_csv(&path, self.spec)?,
                &self.scene,
                frac,
            )?
        } else {
            ImageScore {
                label: "rx0".into(),
                ..single_views[0].clone()
            }
        };
        let bpath = baseline_path(&self.dir);
        let baseline = if bpath.exists() {
            let img = RegularRaster::read_csv(&bpath, self.spec)?;
            Some(ImageScore::evaluate("baseline", &img, &self.scene, frac)?)
        } else {
            None
        };
        let report = MetricsReport {
            support_fraction: frac,
            primary,
            single_views,
            baseline,
            coherence,
            config: self.config.echo(),
        };
        info!(
            "primary image: P-ISLR {:.2} dB, IoU {:.3}",
            report.primary.p_islr_db, report.primary.iou
        );
        let path = self.dir.join(METRICS_FILE);
        fs::write(&path, report.to_json()? + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(vec![path])
    }
}

/// Runs `config` end to end.
pub fn run(config: &RunConfig) -> Result<RunManifest> {
    Runner::new(config.clone())?.run()
}

/// Reads a metrics report written by the `score` stage.
pub fn read_metrics(dir: &Path) -> Result<MetricsReport> {
    let path = dir.join(METRICS_FILE);
    require(&path, Stage::Score)?;
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedArtifact {
        path,
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests;
