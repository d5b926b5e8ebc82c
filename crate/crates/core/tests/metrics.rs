//! Metric suite tests: per-pixel loop oracles, the hand-evaluated AP
//! fixture, and analytic planarity/boundary cases.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use planarkit::grid::{DepthMap, Grid};
use planarkit::masks::InstanceMaskSet;
use planarkit::metrics::{
    average_precision, average_precision_at, depth_edges, depth_metrics, ibims_dbe, ibims_dde,
    ibims_pe, ApSample, DbeParams, IouMode, COCO_THRESHOLDS,
};
use planarkit::plane::Plane3D;
use planarkit::synth::{generate_scene, SceneSpec};
use planarkit::{render_planar_depth, CameraIntrinsics, FitMethod};

fn cam(w: usize, h: usize) -> CameraIntrinsics {
    CameraIntrinsics::new(
        0.8 * w as f64,
        0.8 * w as f64,
        (w as f64 - 1.0) / 2.0,
        (h as f64 - 1.0) / 2.0,
        w,
        h,
    )
    .unwrap()
}

#[test]
fn depth_metrics_match_per_pixel_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let (w, h) = (32, 24);
    let gt = DepthMap::from_values(Grid::from_fn(w, h, |_, _| rng.random_range(0.5..5.0)));
    let mut pred = DepthMap::from_values(Grid::from_fn(w, h, |_, _| rng.random_range(0.5..5.0)));
    for _ in 0..40 {
        let x = rng.random_range(0..w);
        let y = rng.random_range(0..h);
        pred.valid.set(x, y, false);
    }
    let pred = DepthMap::new(pred.values, pred.valid);
    let m = depth_metrics(&pred, &gt).unwrap();

    let (mut rel, mut log10, mut sq, mut n) = (0.0, 0.0, 0.0, 0usize);
    let (mut s1, mut s2, mut s3) = (0usize, 0usize, 0usize);
    for y in 0..h {
        for x in 0..w {
            let (Some(p), Some(g)) = (pred.depth_at(x, y), gt.depth_at(x, y)) else {
                continue;
            };
            n += 1;
            rel += (p - g).abs() / g;
            log10 += (p.log10() - g.log10()).abs();
            sq += (p - g) * (p - g);
            let r = (p / g).max(g / p);
            if r < 1.25 {
                s1 += 1;
            }
            if r < 1.25_f64.powi(2) {
                s2 += 1;
            }
            if r < 1.25_f64.powi(3) {
                s3 += 1;
            }
        }
    }
    let nf = n as f64;
    assert!((m.rel - rel / nf).abs() < 1e-12);
    assert!((m.log10 - log10 / nf).abs() < 1e-12);
    assert!((m.rms - (sq / nf).sqrt()).abs() < 1e-12);
    assert!((m.sigma1 - s1 as f64 / nf).abs() < 1e-12);
    assert!((m.sigma2 - s2 as f64 / nf).abs() < 1e-12);
    assert!((m.sigma3 - s3 as f64 / nf).abs() < 1e-12);
}

/// Rectangle helper over a 20x20 canvas, half-open bounds.
fn rect(x0: usize, y0: usize, x1: usize, y1: usize) -> Grid<f64> {
    Grid::from_fn(20, 20, |x, y| {
        if (x0..x1).contains(&x) && (y0..y1).contains(&y) {
            1.0
        } else {
            0.0
        }
    })
}

fn rect_bool(x0: usize, y0: usize, x1: usize, y1: usize) -> Grid<bool> {
    Grid::from_fn(20, 20, |x, y| (x0..x1).contains(&x) && (y0..y1).contains(&y))
}

/// The committed 3-ground-truth / 4-detection fixture.
///
/// IoUs (all masks rectangular, boxes tight, so mask IoU = box IoU):
///   D1 (score .95) vs G1: 81/100 = 0.81
///   D2 (score .85) vs G2: 63/100 = 0.63
///   D3 (score .75) vs G3: 48/100 = 0.48
///   D4 (score .65) vs G1: 72/100 = 0.72  (G1 always taken by D1 first)
/// Hand evaluation, 101-point interpolation, 3 ground truths:
///   t in {.50,.55,.60}: TP flags [1,1,0,0] -> AP = 67/101
///   t in {.65,.70,.75,.80}: TP flags [1,0,0,0] -> AP = 34/101
///   t in {.85,.90,.95}: no TPs -> AP = 0
///   headline = (3*67 + 4*34) / 1010 = 337/1010
fn ap_fixture() -> ApSample {
    let gts = vec![
        rect_bool(0, 0, 10, 10),
        rect_bool(10, 0, 20, 10),
        rect_bool(0, 10, 10, 20),
    ];
    let dets = vec![
        (rect(0, 0, 9, 9), 0.95),
        (rect(10, 0, 19, 7), 0.85),
        (rect(0, 10, 8, 16), 0.75),
        (rect(0, 0, 9, 8), 0.65),
    ];
    let mut preds = InstanceMaskSet::default();
    for (mask, score) in dets {
        let mut x0 = usize::MAX;
        let mut y0 = usize::MAX;
        let (mut x1, mut y1) = (0usize, 0usize);
        for y in 0..20 {
            for x in 0..20 {
                if mask.at(x, y) > 0.5 {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x + 1);
                    y1 = y1.max(y + 1);
                }
            }
        }
        preds.boxes.push(planarkit::masks::BoundingBox {
            x0: x0 as f64,
            y0: y0 as f64,
            x1: x1 as f64,
            y1: y1 as f64,
        });
        preds.masks.push(mask);
        preds.scores.push(score);
        preds.labels.push(0);
    }
    ApSample {
        predictions: preds,
        gt_masks: gts,
    }
}

#[test]
fn ap_fixture_reproduces_hand_table() {
    let samples = [ap_fixture()];
    for mode in [IouMode::Mask, IouMode::Box] {
        let r = average_precision(&samples, mode);
        assert_eq!(r.ap50, 67.0 / 101.0, "{mode:?} ap50");
        assert_eq!(r.ap75, 34.0 / 101.0, "{mode:?} ap75");
        assert!((r.ap - 337.0 / 1010.0).abs() < 1e-15, "{mode:?} ap = {}", r.ap);
        assert_eq!(r.num_gt, 3);
        assert_eq!(r.num_detections, 4);

        // Per-threshold values behind the headline.
        for (i, &t) in COCO_THRESHOLDS.iter().enumerate() {
            let expected = match i {
                0..=2 => 67.0 / 101.0,
                3..=6 => 34.0 / 101.0,
                _ => 0.0,
            };
            assert_eq!(average_precision_at(&samples, mode, t), expected, "t = {t}");
        }
    }
}

#[test]
fn ap_invariant_under_monotone_score_transforms() {
    let base = ap_fixture();
    let mut transformed = base.clone();
    for s in transformed.predictions.scores.iter_mut() {
        // Strictly monotone map into (0, 1).
        *s = 1.0 / (1.0 + (-(*s) * 7.0).exp());
    }
    let a = average_precision(&[base], IouMode::Mask);
    let b = average_precision(&[transformed], IouMode::Mask);
    assert_eq!(a.ap, b.ap);
    assert_eq!(a.ap50, b.ap50);
    assert_eq!(a.ap75, b.ap75);
}

#[test]
fn ap_nonincreasing_in_threshold_on_random_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for fixture in 0..100 {
        let n_gt = rng.random_range(1..4usize);
        let n_det = rng.random_range(1..6usize);
        let mut gts = Vec::new();
        for _ in 0..n_gt {
            let x0 = rng.random_range(0..12);
            let y0 = rng.random_range(0..12);
            let w = rng.random_range(3..8);
            let h = rng.random_range(3..8);
            gts.push(rect_bool(x0, y0, (x0 + w).min(20), (y0 + h).min(20)));
        }
        let mut preds = InstanceMaskSet::default();
        for _ in 0..n_det {
            let x0 = rng.random_range(0..12);
            let y0 = rng.random_range(0..12);
            let w = rng.random_range(3..8);
            let h = rng.random_range(3..8);
            let mask = rect(x0, y0, (x0 + w).min(20), (y0 + h).min(20));
            preds.boxes.push(planarkit::masks::BoundingBox {
                x0: x0 as f64,
                y0: y0 as f64,
                x1: (x0 + w).min(20) as f64,
                y1: (y0 + h).min(20) as f64,
            });
            preds.masks.push(mask);
            preds.scores.push(rng.random_range(0.05..0.95));
            preds.labels.push(0);
        }
        let samples = [ApSample {
            predictions: preds,
            gt_masks: gts,
        }];
        let mut last = f64::INFINITY;
        for &t in &COCO_THRESHOLDS {
            let ap = average_precision_at(&samples, IouMode::Mask, t);
            assert!(
                ap <= last + 1e-12,
                "fixture {fixture}: AP rose from {last} to {ap} at t = {t}"
            );
            last = ap;
        }
    }
}

#[test]
fn pe_detects_five_degree_rotation() {
    let (w, h) = (48, 36);
    let c = cam(w, h);
    // Ground truth plane: fronto-parallel z = 2.
    let gt_plane = Plane3D {
        normal: [0.0, 0.0, -1.0],
        offset: -2.0,
        inlier_count: w * h,
        rms_residual: 0.0,
    };
    // Prediction generated from the same plane rotated 5 degrees about y
    // through the point (0, 0, 2).
    let a = 5.0_f64.to_radians();
    let n = Vector3::new(a.sin(), 0.0, -a.cos());
    let offset = n.dot(&Vector3::new(0.0, 0.0, 2.0));
    let pred = DepthMap::from_values(Grid::from_fn(w, h, |x, y| {
        offset / n.dot(&c.ray(x as f64, y as f64))
    }));
    let regions = Grid::new(w, h, 1u32);
    let pe = ibims_pe(&pred, &regions, &[gt_plane], &c).unwrap();
    assert!((pe.pe_orie - 5.0).abs() < 0.01, "pe_orie = {}", pe.pe_orie);
    assert!(pe.pe_plan < 1e-9);
}

#[test]
fn pe_measures_sinusoidal_ripple_rms() {
    let (w, h) = (64, 48);
    let c = cam(w, h);
    // 1 cm ripple, four full periods across the width: RMS = 0.01/sqrt(2).
    let amp = 0.01;
    let pred = DepthMap::from_values(Grid::from_fn(w, h, |x, _| {
        2.0 + amp * (2.0 * std::f64::consts::PI * 4.0 * x as f64 / w as f64).sin()
    }));
    let regions = Grid::new(w, h, 1u32);
    let gt_plane = Plane3D {
        normal: [0.0, 0.0, -1.0],
        offset: -2.0,
        inlier_count: w * h,
        rms_residual: 0.0,
    };
    let pe = ibims_pe(&pred, &regions, &[gt_plane], &c).unwrap();
    let analytic_cm = amp / 2.0_f64.sqrt() * 100.0;
    assert!(
        (pe.pe_plan - analytic_cm).abs() / analytic_cm < 0.05,
        "pe_plan = {} vs analytic {}",
        pe.pe_plan,
        analytic_cm
    );
}

#[test]
fn pe_of_rendered_depth_against_fitted_planes_vanishes() {
    let scene = generate_scene(&SceneSpec {
        extra_planes: 1,
        noise_sigma: 0.01,
        rng_seed: 62,
        ..Default::default()
    })
    .unwrap();
    let masks = InstanceMaskSet::from_instance_ids(&scene.seg, None);
    let res = render_planar_depth(&scene.depth, &masks, &scene.cam, FitMethod::Pca).unwrap();
    // Evaluate the rendered depth against the very planes that were fitted:
    // regions are exactly planar by construction.
    let max_id = scene.seg.data().iter().copied().max().unwrap() as usize;
    let mut gt_planes = Vec::new();
    let mut regions = scene.seg.clone();
    for id in 1..=max_id {
        match res.planes[id - 1] {
            Some(p) => gt_planes.push(p),
            None => {
                // Skipped instance: drop its (absent or tiny) region.
                for v in regions.data_mut() {
                    if *v == id as u32 {
                        *v = 0;
                    }
                }
                gt_planes.push(Plane3D {
                    normal: [0.0, 0.0, -1.0],
                    offset: -1.0,
                    inlier_count: 0,
                    rms_residual: 0.0,
                });
            }
        }
    }
    let pe = ibims_pe(&res.depth, &regions, &gt_planes, &scene.cam).unwrap();
    assert!(pe.pe_plan < 1e-6, "pe_plan = {} cm", pe.pe_plan);
    assert!(pe.pe_orie < 1e-6, "pe_orie = {} deg", pe.pe_orie);
}

#[test]
fn dbe_two_pixel_shift_scores_two() {
    let (w, h) = (32, 24);
    // Depth step 1 -> 2 at column 12: gradient map exceeds 10 only at the
    // near-side column 11 (16/1 = 16 vs 16/4 = 4), giving a single-column
    // predicted edge. Ground-truth edge: column 13.
    let pred = DepthMap::from_values(Grid::from_fn(w, h, |x, _| if x < 12 { 1.0 } else { 2.0 }));
    let params = DbeParams {
        edge_threshold: 10.0,
        truncation: 10.0,
    };
    let pred_edges = depth_edges(&pred, params.edge_threshold).unwrap();
    for y in 0..h {
        for x in 0..w {
            assert_eq!(pred_edges.at(x, y), x == 11, "edge at ({x},{y})");
        }
    }
    let gt_edges = Grid::from_fn(w, h, |x, _| x == 13);
    let dbe = ibims_dbe(&pred, &gt_edges, &params).unwrap().unwrap();
    assert_eq!(dbe.dbe_acc, 2.0);
    assert_eq!(dbe.dbe_comp, 2.0);
}

#[test]
fn dbe_matches_bruteforce_nearest_neighbor() {
    let scene = generate_scene(&SceneSpec {
        extra_planes: 2,
        rng_seed: 63,
        ..Default::default()
    })
    .unwrap();
    let (w, h) = (scene.cam.width, scene.cam.height);
    let params = DbeParams::default();
    // Ground-truth edges from the clean depth, prediction = noisy-ish copy
    // shifted one pixel to desynchronize the maps.
    let gt_edges = depth_edges(&scene.clean_depth, params.edge_threshold).unwrap();
    let pred = DepthMap::from_values(Grid::from_fn(w, h, |x, y| {
        scene.clean_depth.values.at(x.saturating_sub(1), y)
    }));
    let dbe = ibims_dbe(&pred, &gt_edges, &params).unwrap().unwrap();

    let pred_edges = depth_edges(&pred, params.edge_threshold).unwrap();
    let nn = |from: &Grid<bool>, to: &Grid<bool>| -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in 0..h {
            for x in 0..w {
                if !from.at(x, y) {
                    continue;
                }
                let mut best = f64::INFINITY;
                for sy in 0..h {
                    for sx in 0..w {
                        if to.at(sx, sy) {
                            let d = ((x as f64 - sx as f64).powi(2)
                                + (y as f64 - sy as f64).powi(2))
                            .sqrt();
                            best = best.min(d);
                        }
                    }
                }
                sum += best.min(params.truncation);
                n += 1;
            }
        }
        sum / n as f64
    };
    assert!((dbe.dbe_acc - nn(&pred_edges, &gt_edges)).abs() < 1e-9);
    assert!((dbe.dbe_comp - nn(&gt_edges, &pred_edges)).abs() < 1e-9);
}

#[test]
fn dde_matches_per_pixel_loop_and_partitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let (w, h) = (40, 30);
    let gt = DepthMap::from_values(Grid::from_fn(w, h, |_, _| rng.random_range(1.0..5.0)));
    let pred = DepthMap::from_values(Grid::from_fn(w, h, |_, _| rng.random_range(1.0..5.0)));
    let d = ibims_dde(&pred, &gt, 3.0).unwrap();

    let (mut n0, mut nm, mut np, mut n) = (0usize, 0usize, 0usize, 0usize);
    for y in 0..h {
        for x in 0..w {
            let p = pred.values.at(x, y) > 3.0;
            let g = gt.values.at(x, y) > 3.0;
            n += 1;
            if p == g {
                n0 += 1;
            } else if p {
                np += 1;
            } else {
                nm += 1;
            }
        }
    }
    assert!((d.dde_0 - 100.0 * n0 as f64 / n as f64).abs() < 1e-9);
    assert!((d.dde_minus - 100.0 * nm as f64 / n as f64).abs() < 1e-9);
    assert!((d.dde_plus - 100.0 * np as f64 / n as f64).abs() < 1e-9);
    assert!((d.dde_0 + d.dde_minus + d.dde_plus - 100.0).abs() < 1e-9);
}
