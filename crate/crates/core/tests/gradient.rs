//! Gradient-map and segmentation-loss tests against explicit per-pixel
//! oracles and finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use planarkit::gradient::{dgs_loss, dgs_loss_grad, gradient_map, sobel_gradients};
use planarkit::grid::{DepthMap, Grid};
use planarkit::synth::{generate_scene, SceneSpec};

use planarkit_testutil::{dgs_oracle, gradient_map_oracle, mask_set_from, rel_error, sobel_oracle};

/// Two fronto-parallel half-planes meeting in a vertical depth step.
fn step_scene(w: usize, h: usize, left: f64, right: f64, step_at: usize) -> DepthMap {
    DepthMap::from_values(Grid::from_fn(w, h, |x, _| {
        if x < step_at {
            left
        } else {
            right
        }
    }))
}

#[test]
fn vertical_step_columns_match_kernel_oracle() {
    let depth = step_scene(8, 8, 1.0, 2.0, 4);
    let s = sobel_gradients(&depth).unwrap();
    let (ogx, ogy, _) = sobel_oracle(&depth);
    for y in 0..8 {
        for x in 0..8 {
            assert_eq!(s.gx.at(x, y), ogx.at(x, y), "gx at ({x},{y})");
            assert_eq!(s.gy.at(x, y), ogy.at(x, y), "gy at ({x},{y})");
        }
    }
    // Columns adjacent to the step carry the full kernel response
    // (weight sum 4 per side on a unit step).
    for y in 0..8 {
        assert_eq!(s.gx.at(3, y).abs(), 4.0);
        assert_eq!(s.gx.at(4, y).abs(), 4.0);
        assert_eq!(s.gx.at(1, y), 0.0);
    }
}

#[test]
fn gradient_map_matches_oracle_on_room_with_occluders() {
    let scene = generate_scene(&SceneSpec {
        extra_planes: 2,
        sphere: true,
        rng_seed: 31,
        ..Default::default()
    })
    .unwrap();
    let g = gradient_map(&scene.clean_depth).unwrap();
    let oracle = gradient_map_oracle(&scene.clean_depth);
    for i in 0..g.values.len() {
        assert!(
            (g.values.data()[i] - oracle.data()[i]).abs() < 1e-12,
            "pixel {i}: {} vs {}",
            g.values.data()[i],
            oracle.data()[i]
        );
    }
}

#[test]
fn dgs_matches_bruteforce_on_step_scene() {
    let depth = step_scene(8, 8, 1.0, 2.0, 4);
    let g = gradient_map(&depth).unwrap();
    let masks = mask_set_from(vec![Grid::new(8, 8, 1.0)]);
    let loss = dgs_loss(&g, &masks).unwrap();
    let oracle = dgs_oracle(&g, &masks);
    assert!((loss - oracle).abs() < 1e-12);
    assert!(loss > 0.0);
}

#[test]
fn mask_inside_plane_scores_zero_straddling_scores_positive() {
    let depth = step_scene(24, 16, 2.0, 3.0, 12);
    let g = gradient_map(&depth).unwrap();
    let inside = Grid::from_fn(24, 16, |x, y| {
        if (2..8).contains(&x) && (4..12).contains(&y) {
            1.0
        } else {
            0.0
        }
    });
    let straddle = Grid::from_fn(24, 16, |x, y| {
        if (8..14).contains(&x) && (4..12).contains(&y) {
            1.0
        } else {
            0.0
        }
    });
    let zero = dgs_loss(&g, &mask_set_from(vec![inside])).unwrap();
    assert_eq!(zero, 0.0);
    let positive = dgs_loss(&g, &mask_set_from(vec![straddle])).unwrap();
    assert!(positive > 0.0);
}

#[test]
fn dgs_is_linear_in_the_mask_stack() {
    let scene = generate_scene(&SceneSpec {
        extra_planes: 1,
        rng_seed: 8,
        ..Default::default()
    })
    .unwrap();
    let g = gradient_map(&scene.clean_depth).unwrap();
    let (w, h) = (scene.cam.width, scene.cam.height);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = Grid::from_fn(w, h, |_, _| rng.random_range(0.0..1.0));
    let q = Grid::from_fn(w, h, |_, _| rng.random_range(0.0..1.0));
    let (a, b) = (0.35, 0.4);
    let combined = Grid::from_fn(w, h, |x, y| a * p.at(x, y) + b * q.at(x, y));

    let lp = dgs_loss(&g, &mask_set_from(vec![p])).unwrap();
    let lq = dgs_loss(&g, &mask_set_from(vec![q])).unwrap();
    let lc = dgs_loss(&g, &mask_set_from(vec![combined])).unwrap();
    assert!(rel_error(lc, a * lp + b * lq) < 1e-9);
}

#[test]
fn dgs_grad_matches_finite_differences_at_1000_coordinates() {
    // Mild step so the finite-difference oracle keeps ~1e-9 relative
    // accuracy at step 1e-4 (the loss is linear in the masks, so the only
    // oracle error is summation roundoff, which scales with the loss
    // magnitude).
    let depth = step_scene(16, 12, 1.0, 1.05, 8);
    let g = gradient_map(&depth).unwrap();
    let (w, h) = (16, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let masks: Vec<Grid<f64>> = (0..2)
        .map(|_| Grid::from_fn(w, h, |_, _| rng.random_range(0.05..0.95)))
        .collect();
    let set = mask_set_from(masks);
    let grads = dgs_loss_grad(&g, &set).unwrap();

    let eps = 1e-4;
    for _ in 0..1000 {
        let j = rng.random_range(0..set.len());
        let x = rng.random_range(0..w);
        let y = rng.random_range(0..h);
        let base = set.masks[j].at(x, y);
        let mut plus = set.clone();
        plus.masks[j].set(x, y, base + eps);
        let mut minus = set.clone();
        minus.masks[j].set(x, y, base - eps);
        let fd = (dgs_loss(&g, &plus).unwrap() - dgs_loss(&g, &minus).unwrap()) / (2.0 * eps);
        let analytic = grads[j].at(x, y);
        if fd.abs() < 1e-15 {
            assert!(analytic.abs() < 1e-12, "({x},{y}): {analytic} vs fd 0");
        } else {
            assert!(
                rel_error(analytic, fd) < 1e-6,
                "({x},{y}): {analytic} vs {fd}"
            );
        }
    }
}
