use std::f64::consts::PI;

use tempfile::TempDir;

use crate::geometry::Point;

use super::*;

fn small(name: &str, dir: &Path) -> RunConfig {
    let mut c = preset(name).unwrap();
    (c.n_tx, c.n_rx, c.l) = (4, 4, 4);
    c.phase1.q = 36;
    c.phase1.iter_max = 3;
    c.density = 20.0;
    c.raster = [15, 15];
    c.fusion.iter_max = 3;
    c.out = dir.to_path_buf();
    c
}

#[test]
fn preset_parameters() {
    let fig2 = preset("fig2").unwrap();
    assert_eq!(fig2.phase1.q, 400);
    assert_eq!(
        (fig2.n_tx, fig2.n_rx, fig2.l, fig2.frames),
        (16, 16, 16, 20)
    );
    assert_eq!(fig2.power_dbm, 10.0);
    assert_eq!(fig2.scene.as_ref().unwrap().rx.len(), 1);
    assert_eq!(fig2.scene.as_ref().unwrap().rx[0].position, RX_POSITIONS[0]);

    let fig4 = preset("fig4").unwrap();
    assert_eq!(
        (fig4.n_tx, fig4.n_rx, fig4.l, fig4.phase1.q),
        (8, 8, 8, 900)
    );
    assert_eq!(
        fig4.scene.as_ref().unwrap().rx[0].position,
        Point::new(7.5, 18.0)
    );

    let fig5 = preset("fig5").unwrap();
    assert_eq!(fig5.power_dbm, 0.0);
    assert_eq!(fig5.phase1.q, 900);
    let s5 = fig5.scene.as_ref().unwrap();
    assert_eq!(s5.rx.len(), 3);
    for r in &s5.rx {
        assert!((r.blind_width_deg.to_radians() - PI / 8.0).abs() < 1e-12);
    }

    let t1 = preset("table1_col2").unwrap();
    assert_eq!((t1.n_tx, t1.n_rx, t1.l), (12, 12, 12));
    assert!(t1.stages.contains(&Stage::Baseline));
    for r in &t1.scene.as_ref().unwrap().rx {
        assert!((r.blind_width_deg.to_radians() - PI / 5.0).abs() < 1e-12);
    }
    assert!(preset("fig9").is_err());
}

#[test]
fn preset_geometry_is_the_reference_setup() {
    for name in PRESET_NAMES {
        let c = preset(name).unwrap();
        let scene = c.load_scene().unwrap();
        assert_eq!(scene.tx.position, Point::new(-3.0, 7.5));
        assert_eq!(
            scene.roi,
            crate::geometry::RegionOfInterest::new(0.0, 15.0, 0.0, 15.0).unwrap()
        );
        assert!((scene.beta0_sq - 1e-7).abs() < 1e-20);
        assert!((c.noise_variance() / 10f64.powf(-13.9) - 1.0).abs() < 1e-12);
        assert_eq!(scene.tx.num_antennas, c.n_tx);
        assert!(scene.rxs.iter().all(|r| r.num_antennas == c.n_rx));
    }
}

#[test]
fn blind_sectors_point_where_intended() {
    let scene = preset("table1_col2").unwrap().load_scene().unwrap();
    // a point on the line toward the transmitter is hidden from receiver 2
    let on_los = Point::new(2.0, 12.5);
    assert!(!scene.visibility(1, on_los));
    assert!(scene.visibility(1, Point::new(12.0, 8.0)));
    let scene5 = preset("fig5").unwrap().load_scene().unwrap();
    assert!(!scene5.visibility(0, Point::new(7.6, 7.5)));
    assert!(!scene5.visibility(2, Point::new(7.5, 7.6)));
}

#[test]
fn letters_scene_covers_four_glyphs() {
    let scene = preset("table1_col2").unwrap().load_scene().unwrap();
    assert_eq!(scene.targets.len(), 4);
    // the stem of the I
    assert!(scene.contains(Point::new(2.0 + 2.5 * 0.75, 8.25 + 3.5 * 0.75)));
    // the hole of the A
    assert!(!scene.contains(Point::new(2.0 + 2.5 * 0.75, 1.5 + 4.5 * 0.75)));
}

#[test]
fn stage_names_parse() {
    assert_eq!(
        parse_stages("simulate, phase1,score").unwrap(),
        vec![Stage::Simulate, Stage::Phase1, Stage::Score]
    );
    assert!(matches!(
        parse_stages("simulate,render"),
        Err(Error::Config(_))
    ));
    for s in Stage::ALL {
        assert_eq!(s.name().parse::<Stage>().unwrap(), s);
    }
}

#[test]
fn config_round_trips_through_toml() {
    let c = preset("fig5").unwrap();
    let text = c.to_toml_string().unwrap();
    assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
    assert!(matches!(
        RunConfig::from_toml_str("seed = 1\nbogus = 2\n"),
        Err(Error::Config(_))
    ));
}

#[test]
fn invalid_configs_are_config_errors() {
    let mut c = preset("fig2").unwrap();
    c.l = 8;
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    let mut c = preset("fig2").unwrap();
    c.phase1.q = 50;
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    let mut c = preset("fig2").unwrap();
    c.scene = None;
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    let mut c = preset("fig2").unwrap();
    c.stages.clear();
    assert!(matches!(c.validate(), Err(Error::Config(_))));
}

#[test]
fn simulate_only_writes_covariances() {
    let dir = TempDir::new().unwrap();
    let mut c = small("fig5", dir.path());
    c.stages = vec![Stage::Simulate];
    let m = run(&c).unwrap();
    assert_eq!(m.stages.len(), 1);
    let arts: Vec<_> = m.artifacts().collect();
    assert_eq!(arts.len(), 3);
    assert!(arts
        .iter()
        .all(|p| p.extension().unwrap() == "bin" && p.exists()));
    assert!(!dir.path().join(METRICS_FILE).exists());
    assert!(!image_path(dir.path(), 0).exists());
}

#[test]
fn missing_upstream_artifact_names_the_stage() {
    let dir = TempDir::new().unwrap();
    let mut c = small("fig2", dir.path());
    c.stages = vec![Stage::Phase1];
    match run(&c) {
        Err(Error::MissingArtifact { stage, .. }) => assert_eq!(stage, "simulate"),
        other => panic!("unexpected {other:?}"),
    }
    c.stages = vec![Stage::Score];
    match run(&c) {
        Err(Error::MissingArtifact { stage, .. }) => assert_eq!(stage, "interp"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn single_receiver_pipeline_artifacts() {
    let dir = TempDir::new().unwrap();
    let m = run(&small("fig2", dir.path())).unwrap();
    let names = |st: Stage| -> Vec<String> {
        m.record(st)
            .unwrap()
            .artifacts
            .iter()
            .map(|p| p.to_string_lossy().into_owned())
            .collect()
    };
    assert_eq!(names(Stage::Simulate), vec!["covariance_rx0.bin"]);
    assert_eq!(
        names(Stage::Phase1),
        vec![
            "positions_rx0.csv",
            "intensities_rx0.csv",
            "phase1_rx0.json"
        ]
    );
    assert!(names(Stage::Interp).contains(&"image_rx0.csv".to_string()));
    assert!(names(Stage::Fuse).is_empty());
    assert_eq!(names(Stage::Score), vec!["metrics.json"]);
    assert!(m.artifacts().all(|p| p.exists()));
    let report = read_metrics(dir.path()).unwrap();
    assert_eq!(report.single_views.len(), 1);
    assert_eq!(report.coherence.len(), 1);
    assert!((0.0..=1.0).contains(&report.primary.iou));
    assert!(dir.path().join(MANIFEST_FILE).exists());
}

fn file_bytes(m: &RunManifest) -> Vec<(PathBuf, Vec<u8>)> {
    m.stages
        .iter()
        .flat_map(|s| &s.artifacts)
        .map(|a| (a.clone(), fs::read(m.out.join(a)).unwrap()))
        .collect()
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let mut ca = small("fig5", a.path());
    ca.stages = Stage::ALL.to_vec();
    let mut cb = ca.clone();
    cb.out = b.path().to_path_buf();
    cb.workers = Some(1);
    let ma = run(&ca).unwrap();
    let mb = run(&cb).unwrap();
    let (fa, fb) = (file_bytes(&ma), file_bytes(&mb));
    assert_eq!(fa.len(), fb.len());
    for ((pa, ba), (pb, bb)) in fa.iter().zip(&fb) {
        assert_eq!(pa, pb);
        assert!(ba == bb, "{} differs", pa.display());
    }
    let ra = read_metrics(a.path()).unwrap();
    assert!(ra.baseline.is_some());
    assert_eq!(ra.single_views.len(), 3);
    assert_eq!(ra.primary.label, "fused");
}

#[test]
fn downstream_stages_rerun_bit_exactly() {
    let dir = TempDir::new().unwrap();
    let c = small("fig5", dir.path());
    let first = run(&c).unwrap();
    let before = file_bytes(&first);
    for k in 0..3 {
        fs::remove_file(image_path(dir.path(), k)).unwrap();
    }
    fs::remove_file(fused_path(dir.path())).unwrap();
    fs::remove_file(dir.path().join(METRICS_FILE)).unwrap();
    let mut again = c.clone();
    again.stages = vec![Stage::Interp, Stage::Fuse, Stage::Score];
    run(&again).unwrap();
    for (rel, bytes) in before {
        assert!(
            fs::read(dir.path().join(&rel)).unwrap() == bytes,
            "{} differs",
            rel.display()
        );
    }
}

#[test]
fn different_seeds_give_different_data() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let mut ca = small("fig2", a.path());
    ca.stages = vec![Stage::Simulate];
    let mut cb = ca.clone();
    cb.out = b.path().to_path_buf();
    cb.seed = 2;
    run(&ca).unwrap();
    run(&cb).unwrap();
    assert_ne!(
        fs::read(covariance_path(a.path(), 0)).unwrap(),
        fs::read(covariance_path(b.path(), 0)).unwrap()
    );
}

#[test]
fn scene_file_is_resolved_relative_to_the_config() {
    let dir = TempDir::new().unwrap();
    let scene = preset("fig2").unwrap().scene.unwrap();
    fs::write(
        dir.path().join("scene.toml"),
        scene.to_toml_string().unwrap(),
    )
    .unwrap();
    let cfg =
        "seed = 3\nscene_file = \"scene.toml\"\nn_tx = 4\nn_rx = 4\nl = 4\n[phase1]\nq = 16\n";
    fs::write(dir.path().join("run.toml"), cfg).unwrap();
    let c = RunConfig::load(&dir.path().join("run.toml")).unwrap();
    c.validate().unwrap();
    let s = c.load_scene().unwrap();
    assert_eq!(s.rxs.len(), 1);
    assert_eq!(s.rxs[0].num_antennas, 4);
}
