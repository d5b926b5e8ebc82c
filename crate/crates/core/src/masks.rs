//! Instance mask stacks with scores, boxes and class labels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;

#[derive(Debug, Error, PartialEq)]
pub enum MaskError {
    #[error("mask set field lengths disagree: masks={masks}, scores={scores}, boxes={boxes}, labels={labels}")]
    LengthMismatch {
        masks: usize,
        scores: usize,
        boxes: usize,
        labels: usize,
    },
    #[error("mask {index} is {got_w}x{got_h}, expected {expected_w}x{expected_h}")]
    SizeMismatch {
        index: usize,
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("mask {index} holds value {value} outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },
    #[error("box {index} = {bbox:?} is invalid or outside the {width}x{height} image")]
    BoxOutOfBounds {
        index: usize,
        bbox: [f64; 4],
        width: usize,
        height: usize,
    },
    #[error("score {index} = {value} outside [0, 1]")]
    ScoreOutOfRange { index: usize, value: f64 },
}

/// Axis-aligned box in pixel coordinates, half-open: `[x0, x1) x [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoundingBox {
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let ix = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let iy = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }
}

/// Ordered stack of per-instance masks with entries in [0, 1].
///
/// Masks may be soft (pre-threshold candidate maps) or binary; consumers
/// that need hard masks binarize at a configurable threshold (0.5 default).
#[derive(Clone, Debug, Default)]
pub struct InstanceMaskSet {
    pub masks: Vec<Grid<f64>>,
    pub scores: Vec<f64>,
    pub boxes: Vec<BoundingBox>,
    pub labels: Vec<u32>,
}

impl InstanceMaskSet {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// Checks all stack invariants against the expected image size.
    pub fn validate(&self, width: usize, height: usize) -> Result<(), MaskError> {
        if self.scores.len() != self.masks.len()
            || self.boxes.len() != self.masks.len()
            || self.labels.len() != self.masks.len()
        {
            return Err(MaskError::LengthMismatch {
                masks: self.masks.len(),
                scores: self.scores.len(),
                boxes: self.boxes.len(),
                labels: self.labels.len(),
            });
        }
        for (i, mask) in self.masks.iter().enumerate() {
            if mask.width() != width || mask.height() != height {
                return Err(MaskError::SizeMismatch {
                    index: i,
                    expected_w: width,
                    expected_h: height,
                    got_w: mask.width(),
                    got_h: mask.height(),
                });
            }
            if let Some(&v) = mask
                .data()
                .iter()
                .find(|v| !(0.0..=1.0).contains(*v) || !v.is_finite())
            {
                return Err(MaskError::ValueOutOfRange { index: i, value: v });
            }
        }
        for (i, b) in self.boxes.iter().enumerate() {
            let ok = b.x0 <= b.x1
                && b.y0 <= b.y1
                && b.x0 >= 0.0
                && b.y0 >= 0.0
                && b.x1 <= width as f64
                && b.y1 <= height as f64;
            if !ok {
                return Err(MaskError::BoxOutOfBounds {
                    index: i,
                    bbox: [b.x0, b.y0, b.x1, b.y1],
                    width,
                    height,
                });
            }
        }
        for (i, &s) in self.scores.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) || !s.is_finite() {
                return Err(MaskError::ScoreOutOfRange { index: i, value: s });
            }
        }
        Ok(())
    }

    /// Binary mask of entry `i` at the given threshold.
    pub fn binary_mask(&self, i: usize, threshold: f64) -> Grid<bool> {
        let m = &self.masks[i];
        Grid::from_fn(m.width(), m.height(), |x, y| m.at(x, y) > threshold)
    }

    /// Builds a mask set from an instance-id grid (0 = background), one
    /// binary mask per id 1..=max, with tight boxes. Scores default to 1.
    pub fn from_instance_ids(seg: &Grid<u32>, scores: Option<&[f64]>) -> Self {
        let max_id = seg.data().iter().copied().max().unwrap_or(0);
        let mut set = InstanceMaskSet::default();
        for id in 1..=max_id {
            let mut mask = Grid::new(seg.width(), seg.height(), 0.0);
            let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0usize, 0usize);
            let mut any = false;
            for y in 0..seg.height() {
                for x in 0..seg.width() {
                    if seg.at(x, y) == id {
                        mask.set(x, y, 1.0);
                        any = true;
                        x0 = x0.min(x);
                        y0 = y0.min(y);
                        x1 = x1.max(x + 1);
                        y1 = y1.max(y + 1);
                    }
                }
            }
            let bbox = if any {
                BoundingBox {
                    x0: x0 as f64,
                    y0: y0 as f64,
                    x1: x1 as f64,
                    y1: y1 as f64,
                }
            } else {
                BoundingBox {
                    x0: 0.0,
                    y0: 0.0,
                    x1: 0.0,
                    y1: 0.0,
                }
            };
            set.masks.push(mask);
            set.boxes.push(bbox);
            set.scores
                .push(scores.and_then(|s| s.get(id as usize - 1).copied()).unwrap_or(1.0));
            set.labels.push(0);
        }
        set
    }
}
