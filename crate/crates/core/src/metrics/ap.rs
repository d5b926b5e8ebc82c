//! Class-agnostic COCO-style average precision for masks and boxes.
//!
//! Protocol: detections are pooled over the dataset and sorted by score;
//! at each IoU threshold every detection greedily claims the free
//! ground-truth instance of its image with the highest IoU above the
//! threshold; the precision envelope is made monotone from the right and
//! AP is the mean of the 101-point interpolated precision-recall curve.
//! The headline value averages thresholds 0.50:0.05:0.95.

use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::masks::{BoundingBox, InstanceMaskSet};
use crate::par::map_indexed;

/// IoU computed on binarized masks or on bounding boxes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IouMode {
    Mask,
    Box,
}

/// One image worth of predictions and ground truth.
#[derive(Clone, Debug)]
pub struct ApSample {
    pub predictions: InstanceMaskSet,
    pub gt_masks: Vec<Grid<bool>>,
}

/// Headline AP plus the two single-threshold values. All fields are NaN
/// when the dataset holds no ground-truth instances (`num_gt == 0`).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ApResult {
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
    pub num_gt: usize,
    pub num_detections: usize,
}

/// Mask/box AP triples for a detection set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    pub ap_mask: f64,
    pub ap_mask50: f64,
    pub ap_mask75: f64,
    pub ap_box: f64,
    pub ap_box50: f64,
    pub ap_box75: f64,
}

pub const COCO_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];
const MASK_BINARIZE: f64 = 0.5;

fn mask_iou(pred: &Grid<bool>, gt: &Grid<bool>) -> f64 {
    let mut inter = 0usize;
    let mut uni = 0usize;
    for (p, g) in pred.data().iter().zip(gt.data()) {
        if *p && *g {
            inter += 1;
        }
        if *p || *g {
            uni += 1;
        }
    }
    if uni == 0 {
        0.0
    } else {
        inter as f64 / uni as f64
    }
}

fn tight_box(mask: &Grid<bool>) -> BoundingBox {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0usize, 0usize);
    let mut any = false;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.at(x, y) {
                any = true;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x + 1);
                y1 = y1.max(y + 1);
            }
        }
    }
    if any {
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
    }
}

/// Per-image IoU matrix `iou[det][gt]`.
fn iou_matrix(sample: &ApSample, mode: IouMode) -> Vec<Vec<f64>> {
    match mode {
        IouMode::Mask => {
            let dets: Vec<Grid<bool>> = (0..sample.predictions.len())
                .map(|i| sample.predictions.binary_mask(i, MASK_BINARIZE))
                .collect();
            dets.iter()
                .map(|d| sample.gt_masks.iter().map(|g| mask_iou(d, g)).collect())
                .collect()
        }
        IouMode::Box => {
            let gt_boxes: Vec<BoundingBox> = sample.gt_masks.iter().map(tight_box).collect();
            sample
                .predictions
                .boxes
                .iter()
                .map(|d| gt_boxes.iter().map(|g| d.iou(g)).collect())
                .collect()
        }
    }
}

struct PooledDetections {
    /// (image index, detection index), globally sorted by descending score
    /// with (image, det) as a deterministic tie-break.
    order: Vec<(usize, usize)>,
    ious: Vec<Vec<Vec<f64>>>,
    num_gt: usize,
}

fn pool(samples: &[ApSample], mode: IouMode) -> PooledDetections {
    let ious = map_indexed(samples.len(), |i| iou_matrix(&samples[i], mode));
    let mut order: Vec<(usize, usize)> = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        for d in 0..s.predictions.len() {
            order.push((i, d));
        }
    }
    order.sort_by(|&(ia, da), &(ib, db)| {
        let sa = samples[ia].predictions.scores[da];
        let sb = samples[ib].predictions.scores[db];
        sb.partial_cmp(&sa).unwrap().then(ia.cmp(&ib)).then(da.cmp(&db))
    });
    let num_gt = samples.iter().map(|s| s.gt_masks.len()).sum();
    PooledDetections { order, ious, num_gt }
}

/// Greedy matching at one threshold; returns per-detection TP flags in the
/// pooled score order.
fn match_at(pooled: &PooledDetections, samples: &[ApSample], threshold: f64) -> Vec<bool> {
    let mut gt_taken: Vec<Vec<bool>> = samples.iter().map(|s| vec![false; s.gt_masks.len()]).collect();
    let mut tp = Vec::with_capacity(pooled.order.len());
    for &(img, det) in &pooled.order {
        let row = &pooled.ious[img][det];
        let mut best: Option<(usize, f64)> = None;
        for (g, &iou) in row.iter().enumerate() {
            if gt_taken[img][g] || iou < threshold {
                continue;
            }
            if best.map_or(true, |(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        match best {
            Some((g, _)) => {
                gt_taken[img][g] = true;
                tp.push(true);
            }
            None => tp.push(false),
        }
    }
    tp
}

/// 101-point interpolated AP from TP flags in score order.
fn ap_from_matches(tp: &[bool], num_gt: usize) -> f64 {
    let n = tp.len();
    let mut precision = Vec::with_capacity(n);
    let mut recall = Vec::with_capacity(n);
    let mut tp_cum = 0usize;
    for (i, &hit) in tp.iter().enumerate() {
        if hit {
            tp_cum += 1;
        }
        precision.push(tp_cum as f64 / (i + 1) as f64);
        recall.push(tp_cum as f64 / num_gt as f64);
    }
    // Monotone envelope from the right.
    for i in (0..n.saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut sum = 0.0;
    let mut idx = 0usize;
    for r in 0..=100 {
        let target = r as f64 / 100.0;
        while idx < n && recall[idx] < target {
            idx += 1;
        }
        if idx < n {
            sum += precision[idx];
        }
    }
    sum / 101.0
}

/// AP at a single IoU threshold (NaN when the dataset has no ground truth).
pub fn average_precision_at(samples: &[ApSample], mode: IouMode, threshold: f64) -> f64 {
    let pooled = pool(samples, mode);
    if pooled.num_gt == 0 {
        return f64::NAN;
    }
    let tp = match_at(&pooled, samples, threshold);
    ap_from_matches(&tp, pooled.num_gt)
}

/// Headline AP (mean over COCO thresholds) plus AP50/AP75.
pub fn average_precision(samples: &[ApSample], mode: IouMode) -> ApResult {
    let pooled = pool(samples, mode);
    let num_detections = pooled.order.len();
    if pooled.num_gt == 0 {
        return ApResult {
            ap: f64::NAN,
            ap50: f64::NAN,
            ap75: f64::NAN,
            num_gt: 0,
            num_detections,
        };
    }
    let per_threshold = map_indexed(COCO_THRESHOLDS.len(), |t| {
        let tp = match_at(&pooled, samples, COCO_THRESHOLDS[t]);
        ap_from_matches(&tp, pooled.num_gt)
    });
    let ap = per_threshold.iter().sum::<f64>() / per_threshold.len() as f64;
    ApResult {
        ap,
        ap50: per_threshold[0],
        ap75: per_threshold[5],
        num_gt: pooled.num_gt,
        num_detections,
    }
}

/// Runs both IoU modes and assembles the six-field summary.
pub fn seg_metrics(samples: &[ApSample]) -> SegMetrics {
    let mask = average_precision(samples, IouMode::Mask);
    let bbox = average_precision(samples, IouMode::Box);
    SegMetrics {
        ap_mask: mask.ap,
        ap_mask50: mask.ap50,
        ap_mask75: mask.ap75,
        ap_box: bbox.ap,
        ap_box50: bbox.ap50,
        ap_box75: bbox.ap75,
    }
}
