//! iBims-style depth quality metrics: planarity (PE), depth boundary (DBE)
//! and directed depth error (DDE).

use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::gradient::gradient_map;
use crate::grid::{DepthMap, Grid, GridError};
use crate::plane::{fit_plane_pca, Plane3D};

use super::edt::distance_transform;
use super::MetricError;

/// Planarity error over annotated planar regions.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PeMetrics {
    /// Mean RMS distance of backprojected predicted pixels to their own
    /// fitted plane, centimeters.
    pub pe_plan: f64,
    /// Mean angle between the fitted and ground-truth plane normals, degrees.
    pub pe_orie: f64,
    pub regions_used: usize,
    pub regions_skipped: usize,
}

/// Depth boundary errors, pixels.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DbeMetrics {
    /// Mean truncated distance from predicted edges to ground-truth edges.
    pub dbe_acc: f64,
    /// Mean truncated distance from ground-truth edges to predicted edges.
    pub dbe_comp: f64,
}

/// Edge extraction / truncation parameters for DBE.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DbeParams {
    /// Threshold on the normalized depth-gradient map.
    pub edge_threshold: f64,
    /// Distance cap, pixels.
    pub truncation: f64,
}

impl Default for DbeParams {
    fn default() -> Self {
        Self {
            edge_threshold: 0.05,
            truncation: 10.0,
        }
    }
}

/// Directed depth error: percentages of jointly valid pixels on the
/// correct / too-near / too-far side of a fronto-parallel reference plane.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DdeMetrics {
    pub dde_0: f64,
    pub dde_minus: f64,
    pub dde_plus: f64,
}

/// Planarity metrics: per region, backproject the predicted depth, fit a
/// plane with PCA, and score RMS residual (cm) against itself plus normal
/// angle (degrees) against the ground-truth plane of that region.
///
/// Regions with fewer than 3 valid pixels or a degenerate fit are skipped
/// and counted. `gt_planes[id - 1]` must exist for every region id present.
pub fn ibims_pe(
    pred: &DepthMap,
    gt_planar_regions: &Grid<u32>,
    gt_planes: &[Plane3D],
    cam: &CameraIntrinsics,
) -> Result<PeMetrics, MetricError> {
    pred.values.check_same_size(gt_planar_regions)?;
    let mut labels: Vec<u32> = gt_planar_regions
        .data()
        .iter()
        .copied()
        .filter(|&g| g > 0)
        .collect();
    labels.sort_unstable();
    labels.dedup();

    let mut plan_sum = 0.0;
    let mut orie_sum = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    for &label in &labels {
        let gt_plane = gt_planes
            .get(label as usize - 1)
            .ok_or(MetricError::MissingPlane { region: label })?;
        let mut pts = Vec::new();
        for y in 0..pred.height() {
            for x in 0..pred.width() {
                if gt_planar_regions.at(x, y) == label {
                    if let Some(z) = pred.depth_at(x, y) {
                        pts.push(cam.unproject(x as f64, y as f64, z));
                    }
                }
            }
        }
        if pts.len() < 3 {
            skipped += 1;
            continue;
        }
        match fit_plane_pca(&pts) {
            Ok(fitted) => {
                plan_sum += fitted.rms_residual * 100.0;
                orie_sum += fitted.normal_angle_to(gt_plane).to_degrees();
                used += 1;
            }
            Err(_) => skipped += 1,
        }
    }
    if used == 0 {
        return Err(MetricError::NoRegions);
    }
    Ok(PeMetrics {
        pe_plan: plan_sum / used as f64,
        pe_orie: orie_sum / used as f64,
        regions_used: used,
        regions_skipped: skipped,
    })
}

/// Edge map used by DBE: pixels whose normalized depth-gradient exceeds the
/// threshold (invalid pixels never count as edges).
pub fn depth_edges(depth: &DepthMap, edge_threshold: f64) -> Result<Grid<bool>, MetricError> {
    let g = gradient_map(depth).map_err(|e| match e {
        crate::gradient::GradientError::Grid(g) => MetricError::Grid(g),
        crate::gradient::GradientError::Mask(_) => unreachable!("no masks involved"),
    })?;
    Ok(Grid::from_fn(depth.width(), depth.height(), |x, y| {
        g.valid.at(x, y) && g.values.at(x, y) > edge_threshold
    }))
}

/// Depth boundary errors against a ground-truth edge map.
///
/// Returns `None` when the image has no ground-truth edges (metric absent).
/// With no predicted edges the convention is maximal incompleteness:
/// `(0, truncation)`.
pub fn ibims_dbe(
    pred: &DepthMap,
    gt_edges: &Grid<bool>,
    params: &DbeParams,
) -> Result<Option<DbeMetrics>, MetricError> {
    pred.values.check_same_size(gt_edges)?;
    if !gt_edges.data().iter().any(|&e| e) {
        return Ok(None);
    }
    let pred_edges = depth_edges(pred, params.edge_threshold)?;
    if !pred_edges.data().iter().any(|&e| e) {
        return Ok(Some(DbeMetrics {
            dbe_acc: 0.0,
            dbe_comp: params.truncation,
        }));
    }

    let dist_to_gt = distance_transform(gt_edges);
    let dist_to_pred = distance_transform(&pred_edges);

    let mut acc_sum = 0.0;
    let mut acc_n = 0usize;
    let mut comp_sum = 0.0;
    let mut comp_n = 0usize;
    for i in 0..gt_edges.len() {
        if pred_edges.data()[i] {
            acc_sum += dist_to_gt.data()[i].min(params.truncation);
            acc_n += 1;
        }
        if gt_edges.data()[i] {
            comp_sum += dist_to_pred.data()[i].min(params.truncation);
            comp_n += 1;
        }
    }
    Ok(Some(DbeMetrics {
        dbe_acc: acc_sum / acc_n as f64,
        dbe_comp: comp_sum / comp_n as f64,
    }))
}

/// Directed depth error at the reference distance (3 m in the benchmark):
/// a pixel is "beyond" when its depth exceeds the reference plane.
pub fn ibims_dde(
    pred: &DepthMap,
    gt: &DepthMap,
    plane_distance: f64,
) -> Result<DdeMetrics, MetricError> {
    pred.values.check_same_size(&gt.values)?;
    let mut n = 0usize;
    let mut n0 = 0usize;
    let mut n_minus = 0usize;
    let mut n_plus = 0usize;
    for i in 0..pred.values.len() {
        if !(pred.valid.data()[i] && gt.valid.data()[i]) {
            continue;
        }
        n += 1;
        let p_beyond = pred.values.data()[i] > plane_distance;
        let g_beyond = gt.values.data()[i] > plane_distance;
        match (p_beyond, g_beyond) {
            (a, b) if a == b => n0 += 1,
            (true, false) => n_plus += 1,
            (false, true) => n_minus += 1,
            _ => unreachable!(),
        }
    }
    if n == 0 {
        return Err(GridError::NoValidPixels.into());
    }
    Ok(DdeMetrics {
        dde_0: 100.0 * n0 as f64 / n as f64,
        dde_minus: 100.0 * n_minus as f64 / n as f64,
        dde_plus: 100.0 * n_plus as f64 / n as f64,
    })
}
