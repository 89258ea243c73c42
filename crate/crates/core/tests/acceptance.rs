use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use mvi_core::fusion::{
    lambda_update, wls_cost, FusionConfig, FusionInputs, FusionState, TvOperator,
};
use mvi_core::geometry::{Point, RegionOfInterest};
use mvi_core::interp::{interpolate, EPConfig};
use mvi_core::metrics::{discretization_diag, grid_coherence, ImageScore};
use mvi_core::numerics::{cg_solve, cubic_real_roots, svd2, CMatrix, HermitianInverse};
use mvi_core::pipeline::{
    preset, read_metrics, reference_scene, triangle_and_circle, RunConfig, Runner, Stage,
    METRICS_FILE,
};
use mvi_core::raster::{RasterSpec, RegularRaster};
use mvi_core::signal::{make_pilot, PilotKind, ScattererCloud};
use mvi_core::single_view::{
    model_covariance_inverse, penalized_ml_cost, position_gradient, Dictionary, GridModel,
    Phase1Problem,
};
use mvi_core::Complex64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn run_config(c: &RunConfig) -> Runner {
    let runner = Runner::new(c.clone()).unwrap();
    runner.run().unwrap();
    runner
}

fn random_hpd(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    &a * a.adjoint() / Complex64::new(n as f64, 0.0)
        + CMatrix::identity(n, n) * Complex64::new(0.1, 0.0)
}

fn kernels() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut sm_err: f64 = 0.0;
    for _ in 0..100 {
        let sigma = random_hpd(&mut rng, 32);
        let v: Vec<Complex64> = (0..32)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let s = rng.random_range(0.01..2.0);
        let mut inv = HermitianInverse::from_matrix(sigma.clone()).unwrap();
        inv.rank1_update(&v, s).unwrap();
        let vv = DVector::from_column_slice(&v);
        let direct = (sigma + &vv * vv.adjoint() * Complex64::new(s, 0.0))
            .try_inverse()
            .unwrap();
        sm_err = sm_err.max((inv.inverse() - &direct).norm() / direct.norm());
    }

    let mut cubic_res: f64 = 0.0;
    for _ in 0..1000 {
        let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-10.0..10.0));
        for &r in cubic_real_roots(c[3], c[2], c[1], c[0]).roots() {
            let value = ((c[3] * r + c[2]) * r + c[1]) * r + c[0];
            let scale = c[3].abs() * r.abs().powi(3)
                + c[2].abs() * r * r
                + c[1].abs() * r.abs()
                + c[0].abs();
            cubic_res = cubic_res.max(value.abs() / scale);
        }
    }

    let mut cg_err: f64 = 0.0;
    for _ in 0..20 {
        let n = 40;
        let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &m * m.transpose() + DMatrix::identity(n, n);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = cg_solve(
            |x, y| y.copy_from_slice((&a * DVector::from_column_slice(x)).as_slice()),
            &b,
            1e-12,
            1000,
        )
        .unwrap();
        let direct = a
            .clone()
            .lu()
            .solve(&DVector::from_column_slice(&b))
            .unwrap();
        cg_err = cg_err.max((DVector::from_column_slice(&out.x) - &direct).norm() / direct.norm());
    }

    let mut svd_err: f64 = 0.0;
    for _ in 0..1000 {
        let (a, b, c) = (
            rng.random_range(-1e3..1e3),
            rng.random_range(-1e3..1e3),
            rng.random_range(-1e3..1e3),
        );
        let e = svd2([[a, b], [b, c]]);
        let rec =
            |i: usize, j: usize| e.lambda1 * e.f1[i] * e.f1[j] + e.lambda2 * e.f2[i] * e.f2[j];
        let scale = a.abs().max(b.abs()).max(c.abs());
        let err = (rec(0, 0) - a)
            .abs()
            .max((rec(0, 1) - b).abs())
            .max((rec(1, 1) - c).abs())
            / scale;
        svd_err = svd_err.max(err);
    }
    outcome(
        sm_err < 1e-10 && cubic_res < 1e-9 && cg_err < 1e-6 && svd_err < 1e-12,
        format!("rank-1 {sm_err:.1e}, cubic {cubic_res:.1e}, cg {cg_err:.1e}, svd2 {svd_err:.1e}"),
    )
}

fn small_scene() -> mvi_core::geometry::Scene {
    reference_scene(&[0], triangle_and_circle(), None)
        .into_scene()
        .unwrap()
        .with_antennas(4, 4)
}

fn gradient_check() -> Outcome {
    let scene = small_scene();
    let pilot = make_pilot(PilotKind::Orthogonal, 4, 4, 1.0, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noise = 0.1;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let shat = random_hpd(&mut rng, 16);
        let problem = Phase1Problem::new(&scene, &pilot, 0, noise, &shat).unwrap();
        let mut grid = GridModel::uniform(&problem, 9, 0.6).unwrap();
        let scale = 1.0 / grid.gamma_beta.iter().cloned().fold(0.0, f64::max);
        for q in 0..9 {
            grid.gamma_r[q] = rng.random_range(0.0..1.0) * scale;
            let r = rng.random_range(0.0..0.9) * grid.d_max;
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            let p0 = grid.initial_positions[q];
            let p = Point::new(p0.x + r * t.cos(), p0.y + r * t.sin());
            grid.positions[q] = p;
            grid.gamma_beta[q] = problem.path_loss(p).unwrap();
        }
        let dict = Dictionary::build(&problem, &grid).unwrap();
        let inv = model_covariance_inverse(&grid, &dict, noise).unwrap();
        let active: Vec<usize> = (0..9).collect();
        let g = position_gradient(&problem, &grid, &dict, &inv, &active).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for q in 0..9 {
            let eval = |dx: f64, dy: f64| {
                let mut gr = grid.clone();
                let p = Point::new(gr.positions[q].x + dx, gr.positions[q].y + dy);
                gr.positions[q] = p;
                gr.gamma_beta[q] = problem.path_loss(p).unwrap();
                let d = Dictionary::build(&problem, &gr).unwrap();
                penalized_ml_cost(&gr, &d, &shat, noise, 0.0).unwrap()
            };
            let h = 1e-4;
            let fd = (
                (eval(h, 0.0) - eval(-h, 0.0)) / (2.0 * h),
                (eval(0.0, h) - eval(0.0, -h)) / (2.0 * h),
            );
            num += (g[q].0 - fd.0).powi(2) + (g[q].1 - fd.1).powi(2);
            den += fd.0 * fd.0 + fd.1 * fd.1;
        }
        worst = worst.max((num / den).sqrt());
    }
    outcome(
        worst < 1e-3,
        format!("max relative error {worst:.2e} over 20 instances"),
    )
}

fn monotone_descent(dir: &Path) -> Outcome {
    let mut c = preset("fig2").unwrap();
    c.phase1.q = 100;
    c.phase1.record_trace = true;
    c.stages = vec![Stage::Simulate, Stage::Phase1];
    c.out = dir.join("descent");
    run_config(&c);
    let text = fs::read_to_string(c.out.join("phase1_trace_rx0.csv")).unwrap();
    let costs: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let worst = costs
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].abs().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        costs.len() > 2 && worst <= 1e-9,
        format!(
            "{} trace points, largest relative increase {worst:.1e}",
            costs.len()
        ),
    )
}

fn fig2(dir: &Path) -> Outcome {
    let variants: [(&str, bool, bool); 4] = [
        ("opt+pen", true, true),
        ("opt", true, false),
        ("fixed+pen", false, true),
        ("fixed", false, false),
    ];
    let seeds = 1..=5u64;
    let mut iou = vec![Vec::new(); 4];
    let mut islr = Vec::new();
    for seed in seeds {
        for (i, (name, optimize, penalty)) in variants.iter().enumerate() {
            let mut c = preset("fig2").unwrap();
            c.seed = seed;
            c.phase1.optimize_positions = *optimize;
            if !penalty {
                c.phase1.eta = Some(0.0);
            }
            c.out = dir.join(format!("fig2_{name}_{seed}"));
            run_config(&c);
            let m = read_metrics(&c.out).unwrap();
            iou[i].push(m.primary.iou);
            if i == 0 {
                islr.push(m.primary.p_islr_db);
            }
        }
    }
    let m: Vec<f64> = iou.iter().map(|v| mean(v)).collect();
    let ranked = m.windows(2).all(|w| w[0] >= w[1] - 0.02);
    let (best_iou, best_islr) = (m[0], mean(&islr));
    outcome(
        best_iou >= 0.70 && best_islr <= -8.0 && ranked,
        format!(
            "IoU opt+pen {:.3} opt {:.3} fixed+pen {:.3} fixed {:.3}; P-ISLR {best_islr:.2} dB",
            m[0], m[1], m[2], m[3]
        ),
    )
}

fn fig4(dir: &Path) -> Outcome {
    let mut dynamic = preset("fig4").unwrap();
    dynamic.seed = 1;
    dynamic.out = dir.join("fig4_dynamic");
    run_config(&dynamic);
    let iou_dynamic = read_metrics(&dynamic.out).unwrap().primary.iou;

    let mut dense = dynamic.clone();
    dense.phase1.q = 120 * 120;
    dense.phase1.optimize_positions = false;
    dense.out = dir.join("fig4_dense");
    run_config(&dense);
    let iou_dense = read_metrics(&dense.out).unwrap().primary.iou;

    let scene = dynamic.load_scene().unwrap();
    let pilot = dynamic.pilot().unwrap();
    let mu: Vec<f64> = [60usize, 90, 120]
        .iter()
        .map(|&side| {
            let spec = RasterSpec::new(side, side, scene.roi).unwrap();
            grid_coherence(&scene, &pilot, 0, &spec.centers()).unwrap()
        })
        .collect();
    let increasing = mu.windows(2).all(|w| w[1] > w[0]);
    let margin = iou_dynamic - iou_dense;
    outcome(
        margin >= 0.15 && increasing,
        format!(
            "IoU dynamic {iou_dynamic:.3} vs dense {iou_dense:.3}; coherence {:.9} {:.9} {:.9}",
            mu[0], mu[1], mu[2]
        ),
    )
}

fn fig5(dir: &Path) -> Outcome {
    let mut iou = vec![Vec::new(); 3];
    let mut best_single = Vec::new();
    for seed in 1..=5u64 {
        let mut c = preset("fig5").unwrap();
        c.seed = seed;
        c.stages = vec![Stage::Simulate, Stage::Phase1, Stage::Interp];
        c.out = dir.join(format!("fig5_{seed}"));
        let runner = run_config(&c);
        let scene = c.load_scene().unwrap();
        let rasters: Vec<RegularRaster> = (0..3).map(|k| runner.read_image(k).unwrap()).collect();
        let singles = rasters
            .iter()
            .map(|r| {
                ImageScore::evaluate("single", r, &scene, c.support_fraction)
                    .unwrap()
                    .iou
            })
            .fold(0.0, f64::max);
        best_single.push(singles);
        let spec = rasters[0].spec;
        let variants = [
            FusionConfig {
                mu: Some(0.0),
                eta: Some(0.0),
                ..c.fusion.clone()
            },
            FusionConfig {
                eta: Some(0.0),
                ..c.fusion.clone()
            },
            c.fusion.clone(),
        ];
        for (i, f) in variants.iter().enumerate() {
            let fused = runner
                .fuse_rasters(rasters.clone(), f)
                .unwrap()
                .raster(spec)
                .unwrap();
            iou[i].push(
                ImageScore::evaluate("fused", &fused, &scene, c.support_fraction)
                    .unwrap()
                    .iou,
            );
        }
    }
    let m: Vec<f64> = iou.iter().map(|v| mean(v)).collect();
    let single = mean(&best_single);
    let pass = m[2] - m[1] >= 0.03 && m[1] - m[0] >= 0.03 && m[2] - single >= 0.10;
    outcome(
        pass,
        format!(
            "IoU WLS {:.3} +sparse {:.3} +TV {:.3}; best single view {single:.3}",
            m[0], m[1], m[2]
        ),
    )
}

fn table1(dir: &Path) -> Outcome {
    let (mut islr, mut iou, mut base) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 1..=3u64 {
        let mut c = preset("table1_col2").unwrap();
        c.seed = seed;
        c.out = dir.join(format!("table1_{seed}"));
        run_config(&c);
        let m = read_metrics(&c.out).unwrap();
        islr.push(m.primary.p_islr_db);
        iou.push(m.primary.iou);
        base.push(m.baseline.unwrap().p_islr_db);
    }
    let (islr, iou, base) = (mean(&islr), mean(&iou), mean(&base));
    outcome(
        (islr - -7.77).abs() <= 3.0 && iou >= 0.72 && base - islr >= 5.0,
        format!("P-ISLR {islr:.2} dB, IoU {iou:.3}, baseline P-ISLR {base:.2} dB"),
    )
}

fn ep_step_edge() -> Outcome {
    let roi = RegionOfInterest::new(0.0, 15.0, 0.0, 15.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let side = 20;
    let h = 15.0 / side as f64;
    let sites: Vec<Point> = (0..side * side)
        .map(|i| {
            let (ix, iy) = (i % side, i / side);
            Point::new(
                (ix as f64 + 0.5 + rng.random_range(-0.35..0.35)) * h,
                (iy as f64 + 0.5 + rng.random_range(-0.35..0.35)) * h,
            )
        })
        .collect();
    let values: Vec<f64> = sites
        .iter()
        .map(|p| if p.x < 7.5 { 1.0 } else { 0.0 })
        .collect();
    let spec = RasterSpec::new(30, 30, roi).unwrap();
    let run = |config: EPConfig| interpolate(&sites, &values, spec, &config).unwrap().raster;
    let ep = run(EPConfig::default());
    let nni = run(EPConfig {
        edge_preserving: false,
        ..EPConfig::default()
    });
    let wide = run(EPConfig {
        sigma_ep_sq: Some(1e300),
        ..EPConfig::default()
    });
    let (mut e_ep, mut e_nni, mut n) = (0.0, 0.0, 0);
    for iy in 0..30 {
        for ix in 13..17 {
            let truth = if spec.center(ix, iy).x < 7.5 {
                1.0
            } else {
                0.0
            };
            e_ep += (ep.get(ix, iy) - truth).abs();
            e_nni += (nni.get(ix, iy) - truth).abs();
            n += 1;
        }
    }
    let (e_ep, e_nni) = (e_ep / n as f64, e_nni / n as f64);
    let agree = wide
        .values
        .iter()
        .zip(&nni.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(
        e_ep < e_nni && agree < 1e-10,
        format!("edge MAE EP-NNI {e_ep:.4} vs NNI {e_nni:.4}; wide-kernel gap {agree:.1e}"),
    )
}

fn micro_fixtures() -> Outcome {
    let scene = small_scene();
    let pilot = make_pilot(PilotKind::Orthogonal, 4, 4, 1.0, 0).unwrap();
    let noise = 0.1;
    let shat = CMatrix::identity(16, 16) * Complex64::new(noise, 0.0);
    let problem = Phase1Problem::new(&scene, &pilot, 0, noise, &shat).unwrap();
    let base = GridModel::uniform(&problem, 4, 0.6).unwrap();
    let dict = Dictionary::build(&problem, &base).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut gap_violations = 0;
    for _ in 0..1000 {
        let mut grid = base.clone();
        for g in grid.gamma_r.iter_mut() {
            *g = if rng.random_bool(0.5) {
                rng.random_range(0.0..1.0)
            } else {
                0.0
            };
        }
        let pts: Vec<Point> = (0..3)
            .map(|_| Point::new(rng.random_range(0.0..15.0), rng.random_range(0.0..15.0)))
            .collect();
        let cloud = ScattererCloud::from_points(&scene, pts, vec![1.0 / 3.0; 3]).unwrap();
        let d = discretization_diag(&grid, &dict, &cloud, &pilot, &scene, 0, noise).unwrap();
        let lhs = d.model_gap * d.model_gap;
        let rhs = d.projected_gap.powi(2) + 2.0 * d.orthogonal_energy.powi(2);
        if lhs > rhs * (1.0 + 1e-10) + 1e-30 {
            gap_violations += 1;
        }
    }

    let spec = RasterSpec::new(1, 1, scene.roi).unwrap();
    let tv = TvOperator::new(1, 1);
    let mut lambda_violations = 0;
    for _ in 0..1000 {
        let input = rng.random_range(0.0..1.0);
        let weight = rng.random_range(0.1..10.0);
        let inputs = FusionInputs::new(spec, vec![vec![input]], vec![vec![weight]]).unwrap();
        let mut state = FusionState::initial(&inputs, &tv);
        state.gamma[0] = rng.random_range(0.0..1.0);
        lambda_update(&mut state, &inputs);
        let chosen = wls_cost(&state, &inputs);
        state.lambda[0][0] = !state.lambda[0][0];
        if chosen > wls_cost(&state, &inputs) {
            lambda_violations += 1;
        }
    }
    outcome(
        gap_violations == 0 && lambda_violations == 0,
        format!("gap inequality violations {gap_violations}/1000, selector violations {lambda_violations}/1000"),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let reports: Vec<Vec<u8>> = ["det_a", "det_b"]
        .iter()
        .map(|name| {
            let mut c = preset("fig5").unwrap();
            c.seed = 7;
            c.out = dir.join(name);
            run_config(&c);
            fs::read(c.out.join(METRICS_FILE)).unwrap()
        })
        .collect();
    outcome(
        reports[0] == reports[1],
        format!("{} byte metric reports", reports[0].len()),
    )
}

fn main() {
    let dir = TempDir::new().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("kernel oracles", Box::new(kernels)),
        ("position gradient", Box::new(gradient_check)),
        (
            "monotone descent",
            Box::new(|| monotone_descent(dir.path())),
        ),
        ("single-view ablation", Box::new(|| fig2(dir.path()))),
        ("dynamic vs dense grid", Box::new(|| fig4(dir.path()))),
        ("fusion ablation", Box::new(|| fig5(dir.path()))),
        ("letters band", Box::new(|| table1(dir.path()))),
        ("edge-preserving step", Box::new(ep_step_edge)),
        ("closed-form micro-fixtures", Box::new(micro_fixtures)),
        ("determinism", Box::new(|| determinism(dir.path()))),
    ];
    let mut passed = 0;
    let total = criteria.len();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = check();
        if o.pass {
            passed += 1;
        }
        println!(
            "[{}] {:>2} {name}: {} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {passed}/{total} criteria passed");
}
