//! Reference value-and-gradient formulas for the base losses and the
//! weighted total.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{DepthMap, Grid, GridError};
use crate::par::sum_indexed;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("length mismatch: {left} probabilities vs {right} targets")]
    LengthMismatch { left: usize, right: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("loss component {name} = {value} is negative or non-finite")]
    InvalidComponent { name: &'static str, value: f64 },
}

/// Weights of the total loss; defaults follow the trained configuration
/// (alpha = 3, beta = 5, gamma = 1, delta = 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            beta: 5.0,
            gamma: 1.0,
            delta: 1.0,
        }
    }
}

/// Per-image loss components and their weighted total:
/// `total = focal + alpha*dice + beta*rmse + gamma*dgs + delta*psn`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub focal: f64,
    pub dice: f64,
    pub rmse: f64,
    pub dgs: f64,
    pub psn: f64,
    pub total: f64,
}

impl fmt::Display for LossBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "focal = {}", self.focal)?;
        writeln!(f, "dice = {}", self.dice)?;
        writeln!(f, "rmse = {}", self.rmse)?;
        writeln!(f, "dgs = {}", self.dgs)?;
        writeln!(f, "psn = {}", self.psn)?;
        write!(f, "total = {}", self.total)
    }
}

const PROB_CLAMP: f64 = 1e-7;

/// Focal classification loss: mean of `-a_w (1 - p_t)^gamma ln(p_t)` with
/// `p_t = p` for positive targets and `1 - p` otherwise, probabilities
/// clamped into `[1e-7, 1 - 1e-7]`. Defaults: `alpha_t = 0.25`,
/// `gamma_f = 2`.
pub fn focal_loss(
    probs: &[f64],
    targets: &[bool],
    alpha_t: f64,
    gamma_f: f64,
) -> Result<f64, LossError> {
    if probs.len() != targets.len() {
        return Err(LossError::LengthMismatch {
            left: probs.len(),
            right: targets.len(),
        });
    }
    if probs.is_empty() {
        return Ok(0.0);
    }
    let sum = sum_indexed(probs.len(), |i| {
        let p = probs[i].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let (p_t, a_w) = if targets[i] {
            (p, alpha_t)
        } else {
            (1.0 - p, 1.0 - alpha_t)
        };
        -a_w * (1.0 - p_t).powf(gamma_f) * p_t.ln()
    });
    Ok(sum / probs.len() as f64)
}

const DICE_EPS: f64 = 1e-6;

/// Dice loss between a soft predicted mask and a binary ground-truth mask:
/// `1 - (2 Σ p g + eps) / (Σ p² + Σ g² + eps)` with `eps = 1e-6`.
pub fn dice_loss(pred_mask: &Grid<f64>, gt_mask: &Grid<f64>) -> Result<f64, LossError> {
    pred_mask.check_same_size(gt_mask)?;
    let mut inter = 0.0;
    let mut p_sq = 0.0;
    let mut g_sq = 0.0;
    for (p, g) in pred_mask.data().iter().zip(gt_mask.data()) {
        inter += p * g;
        p_sq += p * p;
        g_sq += g * g;
    }
    Ok(1.0 - (2.0 * inter + DICE_EPS) / (p_sq + g_sq + DICE_EPS))
}

/// RMSE over jointly valid pixels, with its analytic gradient
/// `(p - g) / (rmse * #valid)` (zero grid when the loss is zero).
pub fn rmse_loss(pred: &DepthMap, gt: &DepthMap) -> Result<(f64, Grid<f64>), LossError> {
    pred.values.check_same_size(&gt.values)?;
    let (w, h) = (pred.width(), pred.height());
    let mut count = 0usize;
    let mut sq_sum = 0.0;
    for i in 0..w * h {
        if pred.valid.data()[i] && gt.valid.data()[i] {
            let d = pred.values.data()[i] - gt.values.data()[i];
            sq_sum += d * d;
            count += 1;
        }
    }
    if count == 0 {
        return Err(GridError::NoValidPixels.into());
    }
    let rmse = (sq_sum / count as f64).sqrt();
    let grad = if rmse > 0.0 {
        let scale = 1.0 / (rmse * count as f64);
        Grid::from_fn(w, h, |x, y| {
            if pred.valid.at(x, y) && gt.valid.at(x, y) {
                (pred.values.at(x, y) - gt.values.at(x, y)) * scale
            } else {
                0.0
            }
        })
    } else {
        Grid::new(w, h, 0.0)
    };
    Ok((rmse, grad))
}

/// Already-computed loss components, before weighting.
#[derive(Clone, Copy, Debug)]
pub struct LossParts {
    pub focal: f64,
    pub dice: f64,
    pub rmse: f64,
    pub dgs: f64,
    pub psn: f64,
}

/// Weighted total over the five components. Components must be finite and
/// non-negative.
pub fn total_loss(parts: &LossParts, weights: &LossWeights) -> Result<LossBreakdown, LossError> {
    let named = [
        ("focal", parts.focal),
        ("dice", parts.dice),
        ("rmse", parts.rmse),
        ("dgs", parts.dgs),
        ("psn", parts.psn),
    ];
    for (name, value) in named {
        if !value.is_finite() || value < 0.0 {
            return Err(LossError::InvalidComponent { name, value });
        }
    }
    let total = parts.focal
        + weights.alpha * parts.dice
        + weights.beta * parts.rmse
        + weights.gamma * parts.dgs
        + weights.delta * parts.psn;
    Ok(LossBreakdown {
        focal: parts.focal,
        dice: parts.dice,
        rmse: parts.rmse,
        dgs: parts.dgs,
        psn: parts.psn,
        total,
    })
}
