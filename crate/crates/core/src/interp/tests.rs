use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn roi() -> RegionOfInterest {
    RegionOfInterest::new(0.0, 15.0, 0.0, 15.0).unwrap()
}

fn jittered_sites(side: usize, jitter: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 15.0 / side as f64;
    let mut out = Vec::new();
    let mut offset = || {
        if jitter > 0.0 {
            rng.random_range(-jitter..jitter) * h
        } else {
            0.0
        }
    };
    for iy in 0..side {
        for ix in 0..side {
            out.push(Point::new(
                (ix as f64 + 0.5) * h + offset(),
                (iy as f64 + 0.5) * h + offset(),
            ));
        }
    }
    out
}

#[test]
fn plane_fit_recovers_exact_plane() {
    let pts: Vec<(Point, f64)> = [(0.0, 0.0), (1.0, 0.2), (0.3, 1.0), (2.0, 1.7)]
        .iter()
        .map(|&(x, y)| (Point::new(x, y), 2.0 * x + 3.0 * y))
        .collect();
    let g = plane_fit_gradient(&pts).unwrap();
    assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] - 3.0).abs() < 1e-12);
    let flat: Vec<(Point, f64)> = pts.iter().map(|(p, _)| (*p, 4.0)).collect();
    assert_eq!(plane_fit_gradient(&flat).unwrap(), [0.0, 0.0]);
}

#[test]
fn plane_fit_matches_least_squares_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<(Point, f64)> = (0..20)
        .map(|_| {
            let p = Point::new(rng.random_range(0.0..5.0), rng.random_range(0.0..5.0));
            (
                p,
                1.0 - 0.5 * p.x + 0.25 * p.y + rng.random_range(-0.1..0.1),
            )
        })
        .collect();
    let a = DMatrix::from_fn(20, 3, |i, j| match j {
        0 => 1.0,
        1 => pts[i].0.x,
        _ => pts[i].0.y,
    });
    let b = DVector::from_iterator(20, pts.iter().map(|p| p.1));
    let coef = a.svd(true, true).solve(&b, 1e-14).unwrap();
    let g = plane_fit_gradient(&pts).unwrap();
    assert!((g[0] - coef[1]).abs() < 1e-10 && (g[1] - coef[2]).abs() < 1e-10);
}

#[test]
fn plane_fit_flags_degenerate_sets() {
    let line: Vec<(Point, f64)> = (0..5)
        .map(|i| (Point::new(i as f64, 2.0 * i as f64), i as f64))
        .collect();
    assert!(plane_fit_gradient(&line).is_none());
    assert!(plane_fit_gradient(&line[..2]).is_none());
}

#[test]
fn nearest_index_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sites: Vec<Point> = (0..200)
        .map(|_| Point::new(rng.random_range(2.0..9.0), rng.random_range(0.0..15.0)))
        .collect();
    let index = SiteIndex::new(&sites);
    for _ in 0..500 {
        let p = Point::new(rng.random_range(-5.0..20.0), rng.random_range(-5.0..20.0));
        let brute = (0..sites.len())
            .min_by(|&a, &b| {
                sites[a]
                    .dist_sq(p)
                    .total_cmp(&sites[b].dist_sq(p))
                    .then(a.cmp(&b))
            })
            .unwrap();
        assert_eq!(index.nearest(p), brute);
        let mut order: Vec<usize> = (0..sites.len()).collect();
        order.sort_by(|&a, &b| {
            sites[a]
                .dist_sq(p)
                .total_cmp(&sites[b].dist_sq(p))
                .then(a.cmp(&b))
        });
        assert_eq!(index.k_nearest(p, 8), order[..8].to_vec());
    }
}

#[test]
fn sibson_full_overlap_gives_unit_weight() {
    let sites = jittered_sites(3, 0.0, 0);
    let queries: Vec<Point> = RasterSpec::new(15, 15, roi()).unwrap().centers();
    let w = sibson_weights(&sites, &queries, roi(), 120).unwrap();
    // the query at the center of the middle site lies deep inside its cell
    let mid = queries
        .iter()
        .position(|q| q.dist(Point::new(7.5, 7.5)) < 1e-9)
        .unwrap();
    assert_eq!(w[mid], vec![(4, 1.0)]);
}

#[test]
fn sibson_square_corners_share_equally() {
    let sites = vec![
        Point::new(0.0, 0.0),
        Point::new(15.0, 0.0),
        Point::new(0.0, 15.0),
        Point::new(15.0, 15.0),
    ];
    let w = sibson_weights(&sites, &[Point::new(7.5, 7.5)], roi(), 64).unwrap();
    assert_eq!(w[0].len(), 4);
    for &(_, x) in &w[0] {
        assert!((x - 0.25).abs() <= 0.02);
    }
}

#[test]
fn sibson_weights_normalized_and_stable_under_refinement() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sites: Vec<Point> = (0..10)
        .map(|_| Point::new(rng.random_range(0.0..15.0), rng.random_range(0.0..15.0)))
        .collect();
    let queries = RasterSpec::new(6, 6, roi()).unwrap().centers();
    let coarse = sibson_weights(&sites, &queries, roi(), 48).unwrap();
    let fine = sibson_weights(&sites, &queries, roi(), 96).unwrap();
    let mut max_diff: f64 = 0.0;
    for (a, b) in coarse.iter().zip(&fine) {
        for w in [a, b] {
            assert!((w.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|e| e.1 > 0.0));
        }
        for s in 0..sites.len() {
            let wa = a.iter().find(|e| e.0 == s).map_or(0.0, |e| e.1);
            let wb = b.iter().find(|e| e.0 == s).map_or(0.0, |e| e.1);
            max_diff = max_diff.max((wa - wb).abs());
        }
    }
    assert!(max_diff < 0.05, "max weight change {max_diff}");
}

#[test]
fn structure_tensor_examples() {
    assert_eq!(
        structure_tensor(&[[0.0, 0.0], [0.0, 0.0]], &[0.5, 0.5]),
        [[0.0; 2]; 2]
    );
    assert_eq!(
        structure_tensor(&[[2.0, 3.0]], &[1.0]),
        [[4.0, 6.0], [6.0, 9.0]]
    );
}

#[test]
fn ep_weight_examples() {
    let zero = [[0.0; 2]; 2];
    assert_eq!(ep_weight(0.3, [1.0, 2.0], &zero, 0.1), 0.3);
    // J = lambda1 f1 f1^T with f1 = x axis
    let sigma = 0.2;
    let d = [0.0, 1.5];
    let j = [[7.0, 0.0], [0.0, 0.0]];
    assert_eq!(ep_weight(0.3, d, &j, sigma), 0.3);
    let d = [1.5, 0.0];
    let lambda1 = 2.0 * sigma / (1.5 * 1.5);
    let j = [[lambda1, 0.0], [0.0, 0.0]];
    assert!((ep_weight(0.3, d, &j, sigma) - 0.3 * (-1.0f64).exp()).abs() < 1e-15);
}

#[test]
fn constant_field_stays_constant() {
    let sites = jittered_sites(12, 0.3, 6);
    let values = vec![0.42; sites.len()];
    let spec = RasterSpec::new(20, 20, roi()).unwrap();
    let out = interpolate(&sites, &values, spec, &EPConfig::default()).unwrap();
    assert!(out.raster.values.iter().all(|v| (v - 0.42).abs() < 1e-12));
}

fn step_values(sites: &[Point]) -> Vec<f64> {
    sites
        .iter()
        .map(|p| if p.x < 7.5 { 1.0 } else { 0.0 })
        .collect()
}

#[test]
fn huge_sigma_reduces_to_nni() {
    let sites = jittered_sites(12, 0.3, 7);
    let values = step_values(&sites);
    let spec = RasterSpec::new(20, 20, roi()).unwrap();
    let nni = interpolate(
        &sites,
        &values,
        spec,
        &EPConfig {
            edge_preserving: false,
            ..EPConfig::default()
        },
    )
    .unwrap();
    let ep = interpolate(
        &sites,
        &values,
        spec,
        &EPConfig {
            sigma_ep_sq: Some(1e300),
            ..EPConfig::default()
        },
    )
    .unwrap();
    for (a, b) in ep.raster.values.iter().zip(&nni.raster.values) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn zero_gradients_reduce_to_nni_exactly() {
    // every plane fit of an all-zero field is flat
    let sites = jittered_sites(10, 0.2, 8);
    let values = vec![0.0; sites.len()];
    let spec = RasterSpec::new(16, 16, roi()).unwrap();
    let ep = interpolate(&sites, &values, spec, &EPConfig::default()).unwrap();
    let nni = interpolate(
        &sites,
        &values,
        spec,
        &EPConfig {
            edge_preserving: false,
            ..EPConfig::default()
        },
    )
    .unwrap();
    assert_eq!(ep.raster, nni.raster);
}

#[test]
fn edge_preserving_beats_nni_at_a_step() {
    let sites = jittered_sites(20, 0.35, 9);
    let values = step_values(&sites);
    let spec = RasterSpec::new(30, 30, roi()).unwrap();
    let run = |edge_preserving: bool| {
        interpolate(
            &sites,
            &values,
            spec,
            &EPConfig {
                edge_preserving,
                ..EPConfig::default()
            },
        )
        .unwrap()
        .raster
    };
    let ep = run(true);
    let nni = run(false);
    let mut err = (0.0, 0.0);
    let mut count = 0;
    for iy in 0..30 {
        // the edge x = 7.5 falls between columns 14 and 15
        for ix in 13..17 {
            let truth = if spec.center(ix, iy).x < 7.5 {
                1.0
            } else {
                0.0
            };
            err.0 += (ep.get(ix, iy) - truth).abs();
            err.1 += (nni.get(ix, iy) - truth).abs();
            count += 1;
        }
    }
    let (ep_mae, nni_mae) = (err.0 / count as f64, err.1 / count as f64);
    assert!(ep_mae < nni_mae, "EP-NNI {ep_mae} vs NNI {nni_mae}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn output_is_a_convex_combination(seed in 0u64..10_000, side in 4usize..9) {
        let sites = jittered_sites(side, 0.4, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let values: Vec<f64> = sites.iter().map(|_| rng.random_range(0.0..1.0)).collect();
        let spec = RasterSpec::new(12, 12, roi()).unwrap();
        let out = interpolate(&sites, &values, spec, &EPConfig::default()).unwrap();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in &out.raster.values {
            prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
        }
    }

    #[test]
    fn structure_tensor_is_psd(g in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.0f64..1.0), 1..10)) {
        let grads: Vec<[f64; 2]> = g.iter().map(|t| [t.0, t.1]).collect();
        let w: Vec<f64> = g.iter().map(|t| t.2).collect();
        let j = structure_tensor(&grads, &w);
        let e = svd2(j);
        let scale = j[0][0] + j[1][1];
        prop_assert!(e.lambda2 >= -1e-12 * scale.max(1.0));
    }
}
