//! Surface-normal subsystem tests: sampling contracts re-checked
//! independently, combined normal maps against generator geometry, and the
//! loss against an independent summation oracle plus finite differences.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use planarkit::cloud::backproject;
use planarkit::grid::{DepthMap, Grid};
use planarkit::normal::{
    combined_normal_map, psn_loss, psn_loss_for_batch, psn_loss_grad_for_batch, psn_triplets,
    sample_triplets, triplet_normals, SamplingConfig,
};
use planarkit::synth::{generate_scene, SceneSpec};
use planarkit::CameraIntrinsics;

use planarkit_testutil::{
    angle_between, axis_angle_between, psn_oracle, rel_error_floored, valid_pixels,
};

fn cam(w: usize, h: usize) -> CameraIntrinsics {
    CameraIntrinsics::new(
        0.9 * w as f64,
        0.9 * w as f64,
        (w as f64 - 1.0) / 2.0,
        (h as f64 - 1.0) / 2.0,
        w,
        h,
    )
    .unwrap()
}

/// Re-checks the per-group restriction predicate from scratch.
fn predicate_holds(
    points: &[Vector3<f64>],
    tri: &[usize; 3],
    group: u32,
    cfg: &SamplingConfig,
) -> bool {
    let (a, b, c) = (points[tri[0]], points[tri[1]], points[tri[2]]);
    let ab = b - a;
    let ac = c - a;
    let angle = angle_between(&ab, &ac);
    let lo = cfg.min_angle_deg.to_radians();
    if !(lo..=std::f64::consts::PI - lo).contains(&angle) {
        return false;
    }
    if group == 0 {
        let d = cfg.min_distance;
        if ab.norm() < d || ac.norm() < d || (c - b).norm() < d {
            return false;
        }
    }
    true
}

#[test]
fn dense_plane_group_fills_k_and_satisfies_predicate() {
    let scene = generate_scene(&SceneSpec {
        sphere: true,
        rng_seed: 17,
        ..Default::default()
    })
    .unwrap();
    let cloud = backproject(&scene.clean_depth, &scene.cam, Some(&scene.seg)).unwrap();
    let cfg = SamplingConfig {
        triplets_per_group: 100,
        rng_seed: 5,
        ..Default::default()
    };
    let batch = sample_triplets(&cloud, &cfg).unwrap();
    // Every wall dense enough to sample from must reach K (walls outside
    // the view, like the one behind the camera, have no points at all).
    for wall in 1..=6u32 {
        let available = cloud.group_of.iter().filter(|&&g| g == wall).count();
        if available < 50 {
            continue;
        }
        let n = batch.group_of.iter().filter(|&&g| g == wall).count();
        assert_eq!(n, 100, "wall {wall} accepted {n} of 100 ({available} points)");
    }
    for (i, tri) in batch.triplets.iter().enumerate() {
        assert!(
            predicate_holds(&cloud.points, tri, batch.group_of[i], &cfg),
            "triplet {i} violates its restriction"
        );
    }
}

#[test]
fn planar_groups_ignore_the_distance_bound_nonplanar_enforces_it() {
    // A tight cluster of coplanar points: every pairwise distance is far
    // below min_distance. As a planar group it samples fine; as the
    // non-planar group nothing passes.
    let mut points = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..40 {
        points.push(Vector3::new(
            rng.random_range(-0.05..0.05),
            rng.random_range(-0.05..0.05),
            2.0,
        ));
    }
    let n = points.len();
    let planar = planarkit::cloud::PointCloud {
        points: points.clone(),
        pixel_of: (0..n).map(|i| (i as u32, 0)).collect(),
        group_of: vec![1; n],
    };
    let nonplanar = planarkit::cloud::PointCloud {
        points,
        pixel_of: (0..n).map(|i| (i as u32, 0)).collect(),
        group_of: vec![0; n],
    };
    let cfg = SamplingConfig {
        triplets_per_group: 10,
        min_distance: 0.3,
        rng_seed: 4,
        ..Default::default()
    };
    let from_planar = sample_triplets(&planar, &cfg).unwrap();
    assert_eq!(from_planar.len(), 10);
    let from_nonplanar = sample_triplets(&nonplanar, &cfg).unwrap();
    assert!(from_nonplanar.is_empty());
}

#[test]
fn triplet_normals_are_orthogonal_to_both_edges() {
    let scene = generate_scene(&SceneSpec {
        extra_planes: 1,
        rng_seed: 23,
        ..Default::default()
    })
    .unwrap();
    let cloud = backproject(&scene.clean_depth, &scene.cam, Some(&scene.seg)).unwrap();
    let cfg = SamplingConfig {
        triplets_per_group: 40,
        rng_seed: 12,
        ..Default::default()
    };
    let batch = sample_triplets(&cloud, &cfg).unwrap();
    let filled = triplet_normals(&cloud, &batch).unwrap();
    assert_eq!(filled.normals.len(), filled.triplets.len());
    for (i, tri) in filled.triplets.iter().enumerate() {
        let (a, b, c) = (cloud.points[tri[0]], cloud.points[tri[1]], cloud.points[tri[2]]);
        let n = filled.normals[i];
        assert!((n.norm() - 1.0).abs() < 1e-9);
        assert!(n.dot(&(b - a)).abs() < 1e-9 * (b - a).norm());
        assert!(n.dot(&(c - a)).abs() < 1e-9 * (c - a).norm());
        assert!(n.z <= 1e-9);
    }
}

#[test]
fn combined_normal_map_recovers_room_wall_normals() {
    let scene = generate_scene(&SceneSpec {
        rng_seed: 2,
        ..Default::default()
    })
    .unwrap();
    let map = combined_normal_map(&scene.clean_depth, &scene.seg, &scene.cam, 3).unwrap();
    for y in 0..scene.cam.height {
        for x in 0..scene.cam.width {
            let id = scene.seg.at(x, y);
            assert!(id >= 1);
            let got = map.normal_at(x, y).unwrap();
            let want = scene.planes[id as usize - 1].normal_vec();
            assert!(
                angle_between(&got, &want) < 1e-6,
                "pixel ({x},{y}) wall {id}"
            );
        }
    }
    // Per-region constancy, bitwise.
    for wall in 1..=6u32 {
        let mut first: Option<[f64; 3]> = None;
        for y in 0..scene.cam.height {
            for x in 0..scene.cam.width {
                if scene.seg.at(x, y) == wall {
                    let n = map.normals.at(x, y);
                    match first {
                        None => first = Some(n),
                        Some(f) => assert_eq!(f, n),
                    }
                }
            }
        }
    }
}

#[test]
fn sphere_local_normals_match_analytic_within_two_degrees() {
    let scene = generate_scene(&SceneSpec {
        width: 256,
        height: 192,
        sphere: true,
        rng_seed: 14,
        ..Default::default()
    })
    .unwrap();
    let map = combined_normal_map(&scene.clean_depth, &scene.seg, &scene.cam, 3).unwrap();
    let mut checked = 0usize;
    for y in 0..scene.cam.height {
        for x in 0..scene.cam.width {
            if scene.seg.at(x, y) != 0 {
                continue;
            }
            let want = scene.normals.normal_at(x, y).unwrap();
            // The contract covers the smooth central cap. Near the
            // occluding contour foreshortening skews the window and the
            // windowed fit is legitimately biased.
            if want.z > -0.766 {
                continue;
            }
            // The 7x7 fit window must not mix sphere and background.
            let mut interior = true;
            for dy in -3i64..=3 {
                for dx in -3i64..=3 {
                    let sx = x as i64 + dx;
                    let sy = y as i64 + dy;
                    if sx < 0
                        || sy < 0
                        || sx >= scene.cam.width as i64
                        || sy >= scene.cam.height as i64
                        || scene.seg.at(sx as usize, sy as usize) != 0
                    {
                        interior = false;
                    }
                }
            }
            if !interior {
                continue;
            }
            let got = map.normal_at(x, y).unwrap();
            let angle = axis_angle_between(&got, &want).to_degrees();
            assert!(angle < 2.0, "pixel ({x},{y}): {angle} degrees");
            checked += 1;
        }
    }
    assert!(checked > 100, "only {checked} cap pixels checked");
}

#[test]
fn psn_loss_zero_on_identical_planar_scene() {
    let scene = generate_scene(&SceneSpec {
        extra_planes: 1,
        rng_seed: 3,
        ..Default::default()
    })
    .unwrap();
    let cfg = SamplingConfig {
        triplets_per_group: 60,
        rng_seed: 8,
        ..Default::default()
    };
    let loss = psn_loss(
        &scene.clean_depth,
        &scene.clean_depth,
        &scene.seg,
        &scene.cam,
        &cfg,
    )
    .unwrap();
    assert!(loss.value < 1e-9, "loss = {}", loss.value);
}

#[test]
fn psn_matches_independent_summation_on_warped_prediction() {
    let scene = generate_scene(&SceneSpec {
        sphere: true,
        extra_planes: 1,
        rng_seed: 19,
        ..Default::default()
    })
    .unwrap();
    let (w, h) = (scene.cam.width, scene.cam.height);
    // Smooth warp of the prediction.
    let pred = DepthMap::from_values(Grid::from_fn(w, h, |x, y| {
        let z = scene.clean_depth.values.at(x, y);
        z * (1.0 + 0.02 * (x as f64 / w as f64 * 3.0).sin() * (y as f64 / h as f64 * 2.0).cos())
    }));
    let cfg = SamplingConfig {
        triplets_per_group: 50,
        min_distance: 0.2,
        rng_seed: 6,
        ..Default::default()
    };
    let batch = psn_triplets(&pred, &scene.seg, &scene.cam, &cfg).unwrap();
    let loss = psn_loss_for_batch(&pred, &scene.clean_depth, &scene.seg, &scene.cam, &batch)
        .unwrap();
    let oracle = psn_oracle(&pred, &scene.clean_depth, &scene.seg, &scene.cam, &batch).unwrap();
    assert!(
        (loss.value - oracle).abs() < 1e-12,
        "{} vs oracle {}",
        loss.value,
        oracle
    );
}

#[test]
fn psn_grad_matches_finite_differences() {
    let scene = generate_scene(&SceneSpec {
        width: 64,
        height: 48,
        extra_planes: 1,
        sphere: true,
        rng_seed: 29,
        ..Default::default()
    })
    .unwrap();
    let (w, h) = (scene.cam.width, scene.cam.height);
    let pred = DepthMap::from_values(Grid::from_fn(w, h, |x, y| {
        let z = scene.clean_depth.values.at(x, y);
        z * (1.0 + 0.03 * ((x + 2 * y) as f64 * 0.11).sin())
    }));
    let cfg = SamplingConfig {
        triplets_per_group: 40,
        min_distance: 0.2,
        rng_seed: 13,
        ..Default::default()
    };
    let batch = psn_triplets(&pred, &scene.seg, &scene.cam, &cfg).unwrap();
    let grad = psn_loss_grad_for_batch(&pred, &scene.clean_depth, &scene.seg, &scene.cam, &batch)
        .unwrap();

    // Pixels participating in at least one triplet.
    let pixels = valid_pixels(&pred);
    let mut touched = Vec::new();
    let mut seen = Grid::new(w, h, false);
    for tri in &batch.triplets {
        for &i in tri {
            let (x, y) = pixels[i];
            if !seen.at(x, y) {
                seen.set(x, y, true);
                touched.push((x, y));
            }
        }
    }
    assert!(touched.len() >= 200, "only {} touched pixels", touched.len());

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let eps = 1e-4;
    for _ in 0..200 {
        let (x, y) = touched[rng.random_range(0..touched.len())];
        let mut plus = pred.clone();
        plus.values.set(x, y, plus.values.at(x, y) + eps);
        let mut minus = pred.clone();
        minus.values.set(x, y, minus.values.at(x, y) - eps);
        let lp = psn_loss_for_batch(&plus, &scene.clean_depth, &scene.seg, &scene.cam, &batch)
            .unwrap()
            .value;
        let lm = psn_loss_for_batch(&minus, &scene.clean_depth, &scene.seg, &scene.cam, &batch)
            .unwrap()
            .value;
        let fd = (lp - lm) / (2.0 * eps);
        let analytic = grad.at(x, y);
        assert!(
            rel_error_floored(analytic, fd, 1e-7) < 1e-4,
            "pixel ({x},{y}): analytic {analytic} vs fd {fd}"
        );
    }
}

#[test]
fn psn_grad_zero_at_ground_truth() {
    let scene = generate_scene(&SceneSpec {
        rng_seed: 4,
        ..Default::default()
    })
    .unwrap();
    let cfg = SamplingConfig {
        triplets_per_group: 30,
        rng_seed: 2,
        ..Default::default()
    };
    let grad = planarkit::normal::psn_loss_grad(
        &scene.clean_depth,
        &scene.clean_depth,
        &scene.seg,
        &scene.cam,
        &cfg,
    )
    .unwrap();
    for v in grad.data() {
        assert!(v.abs() < 1e-9, "grad entry {v}");
    }
}

#[test]
fn psn_decreases_along_interpolation_toward_ground_truth() {
    // Ground truth: fronto-parallel plane. Prediction: the same plane
    // tilted 10 degrees. Interpolating the depth toward ground truth must
    // monotonically shrink the loss.
    let (w, h) = (48, 36);
    let c = cam(w, h);
    let gt = DepthMap::constant(w, h, 2.5);
    let tilt = 10.0_f64.to_radians();
    let n = Vector3::new(tilt.sin(), 0.0, -tilt.cos());
    let offset = n.dot(&Vector3::new(0.0, 0.0, 2.5));
    let tilted = DepthMap::from_values(Grid::from_fn(w, h, |x, y| {
        offset / n.dot(&c.ray(x as f64, y as f64))
    }));
    let seg = Grid::new(w, h, 1u32);
    let cfg = SamplingConfig {
        triplets_per_group: 80,
        rng_seed: 10,
        ..Default::default()
    };
    let mut last = f64::INFINITY;
    for step in 0..=5 {
        let t = step as f64 / 5.0;
        let pred = DepthMap::from_values(Grid::from_fn(w, h, |x, y| {
            (1.0 - t) * tilted.values.at(x, y) + t * gt.values.at(x, y)
        }));
        let loss = psn_loss(&pred, &gt, &seg, &c, &cfg).unwrap().value;
        assert!(
            loss < last + 1e-12,
            "step {step}: loss {loss} did not decrease from {last}"
        );
        last = loss;
    }
    assert!(last < 1e-9);
}

#[test]
fn psn_loss_stays_in_cosine_range() {
    let scene = generate_scene(&SceneSpec {
        sphere: true,
        rng_seed: 44,
        ..Default::default()
    })
    .unwrap();
    let (w, h) = (scene.cam.width, scene.cam.height);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..5 {
        let pred = DepthMap::from_values(Grid::from_fn(w, h, |x, y| {
            let z = scene.clean_depth.values.at(x, y);
            (z + rng.random_range(-0.3..0.3)).max(0.1)
        }));
        let cfg = SamplingConfig {
            triplets_per_group: 30,
            min_distance: 0.1,
            rng_seed: trial,
            ..Default::default()
        };
        let loss = psn_loss(&pred, &scene.clean_depth, &scene.seg, &scene.cam, &cfg)
            .unwrap()
            .value;
        assert!((0.0..=2.0).contains(&loss), "trial {trial}: loss {loss}");
    }
}
