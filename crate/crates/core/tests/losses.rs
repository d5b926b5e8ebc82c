//! Base-loss tests against explicit summation oracles and finite
//! differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use planarkit::grid::{DepthMap, Grid};
use planarkit::losses::{
    dice_loss, focal_loss, rmse_loss, total_loss, LossParts, LossWeights,
};

use planarkit_testutil::{rel_error, rel_error_floored};

#[test]
fn focal_matches_per_element_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let probs: Vec<f64> = (0..256).map(|_| rng.random_range(0.001..0.999)).collect();
    let targets: Vec<bool> = (0..256).map(|_| rng.random_bool(0.4)).collect();
    let (alpha_t, gamma_f) = (0.25, 2.0);
    let loss = focal_loss(&probs, &targets, alpha_t, gamma_f).unwrap();

    let mut sum = 0.0;
    for i in 0..probs.len() {
        let p = probs[i].clamp(1e-7, 1.0 - 1e-7);
        let (p_t, a_w) = if targets[i] { (p, alpha_t) } else { (1.0 - p, 1.0 - alpha_t) };
        sum += -a_w * (1.0 - p_t).powf(gamma_f) * p_t.ln();
    }
    let oracle = sum / probs.len() as f64;
    assert!((loss - oracle).abs() < 1e-12);
}

#[test]
fn rmse_grad_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let (w, h) = (16, 12);
    let gt = DepthMap::from_values(Grid::from_fn(w, h, |_, _| rng.random_range(1.0..4.0)));
    let mut pred = DepthMap::from_values(Grid::from_fn(w, h, |_, _| rng.random_range(1.0..4.0)));
    // A few invalid pixels on either side.
    pred.valid.set(3, 3, false);
    let pred = DepthMap::new(pred.values, pred.valid);

    let (_, grad) = rmse_loss(&pred, &gt).unwrap();
    let eps = 1e-4;
    for _ in 0..300 {
        let x = rng.random_range(0..w);
        let y = rng.random_range(0..h);
        let mut plus = pred.clone();
        plus.values.set(x, y, plus.values.at(x, y) + eps);
        let mut minus = pred.clone();
        minus.values.set(x, y, minus.values.at(x, y) - eps);
        let fd =
            (rmse_loss(&plus, &gt).unwrap().0 - rmse_loss(&minus, &gt).unwrap().0) / (2.0 * eps);
        let analytic = grad.at(x, y);
        if !pred.valid.at(x, y) {
            assert_eq!(analytic, 0.0);
            continue;
        }
        assert!(
            rel_error_floored(analytic, fd, 1e-9) < 1e-6,
            "({x},{y}): {analytic} vs {fd}"
        );
    }
}

#[test]
fn dice_grad_free_oracle_on_random_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let pred = Grid::from_fn(10, 10, |_, _| rng.random_range(0.0..1.0));
    let gt = Grid::from_fn(10, 10, |_, _| if rng.random_bool(0.5) { 1.0 } else { 0.0 });
    let loss = dice_loss(&pred, &gt).unwrap();
    let mut inter = 0.0;
    let mut p2 = 0.0;
    let mut g2 = 0.0;
    for i in 0..100 {
        inter += pred.data()[i] * gt.data()[i];
        p2 += pred.data()[i] * pred.data()[i];
        g2 += gt.data()[i] * gt.data()[i];
    }
    let oracle = 1.0 - (2.0 * inter + 1e-6) / (p2 + g2 + 1e-6);
    assert!((loss - oracle).abs() < 1e-12);
}

#[test]
fn total_is_linear_in_each_component() {
    let weights = LossWeights::default();
    let base = LossParts {
        focal: 0.2,
        dice: 0.4,
        rmse: 0.1,
        dgs: 0.05,
        psn: 0.3,
    };
    let t0 = total_loss(&base, &weights).unwrap().total;
    let mut bumped = base;
    bumped.dice += 1.0;
    let t1 = total_loss(&bumped, &weights).unwrap().total;
    assert!(rel_error(t1 - t0, weights.alpha) < 1e-12);

    let mut bumped = base;
    bumped.psn += 2.0;
    let t2 = total_loss(&bumped, &weights).unwrap().total;
    assert!(rel_error(t2 - t0, 2.0 * weights.delta) < 1e-12);
}

#[test]
fn breakdown_invariant_holds() {
    let weights = LossWeights {
        alpha: 1.5,
        beta: 0.25,
        gamma: 2.0,
        delta: 0.75,
    };
    let parts = LossParts {
        focal: 0.11,
        dice: 0.22,
        rmse: 0.33,
        dgs: 0.44,
        psn: 0.55,
    };
    let b = total_loss(&parts, &weights).unwrap();
    let recomputed = b.focal
        + weights.alpha * b.dice
        + weights.beta * b.rmse
        + weights.gamma * b.dgs
        + weights.delta * b.psn;
    assert!((b.total - recomputed).abs() < 1e-12);
}
