//! Triplet sampling, combined normal maps and the plane surface-normal loss.
//!
//! The loss compares unit normals of point triplets sampled on the predicted
//! cloud against targets derived from ground truth: planar groups are held
//! to their region's fitted plane normal, the non-planar group to the normal
//! of the same pixel triplet backprojected through ground-truth depth.
//! Sampling restrictions differ per group: every triplet must be far from
//! colinear, and non-planar triplets must additionally span a minimum
//! pairwise 3D distance so they average out local sensor noise.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraIntrinsics;
use crate::cloud::{backproject, CloudError, PointCloud};
use crate::derive_seed;
use crate::grid::{DepthMap, Grid, GridError};
use crate::par::map_indexed;
use crate::plane::{fit_plane_pca, orient_camera_facing};

#[derive(Debug, Error)]
pub enum NormalError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error("invalid sampling config: {0}")]
    BadConfig(String),
    #[error("no surviving triplets: sample is uninformative")]
    NoTriplets,
    #[error("triplet index {index} out of bounds for cloud of {len} points")]
    IndexOutOfBounds { index: usize, len: usize },
}

/// Triplet sampling parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Triplets requested per group (K).
    pub triplets_per_group: usize,
    /// Colinearity bound: the angle between the two edge vectors must lie in
    /// `[min_angle, 180 - min_angle]` degrees.
    pub min_angle_deg: f64,
    /// Minimum pairwise 3D distance, applied to the non-planar group only.
    pub min_distance: f64,
    pub rng_seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            triplets_per_group: 100,
            min_angle_deg: 15.0,
            min_distance: 0.3,
            rng_seed: 0,
        }
    }
}

impl SamplingConfig {
    fn validate(&self) -> Result<(), NormalError> {
        if self.triplets_per_group == 0 {
            return Err(NormalError::BadConfig("triplets_per_group must be >= 1".into()));
        }
        if !(0.0 < self.min_angle_deg && self.min_angle_deg < 90.0) {
            return Err(NormalError::BadConfig(format!(
                "min_angle_deg must lie in (0, 90), got {}",
                self.min_angle_deg
            )));
        }
        if self.min_distance < 0.0 {
            return Err(NormalError::BadConfig("min_distance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Non-fatal events recorded while sampling or computing normals.
#[derive(Clone, Debug, PartialEq)]
pub enum SamplingWarning {
    /// A group had fewer than 3 points and was skipped.
    GroupTooSmall { group: u32 },
    /// Rejection sampling ran out of attempts before reaching K.
    Exhausted {
        group: u32,
        accepted: usize,
        requested: usize,
    },
    /// Triplets dropped for a numerically zero cross product.
    DegenerateTriplets { count: usize },
}

/// Sampled triplets into a [`PointCloud`], with per-triplet group label and
/// (after [`triplet_normals`]) unit camera-facing normals.
#[derive(Clone, Debug, Default)]
pub struct TripletBatch {
    pub triplets: Vec<[usize; 3]>,
    pub group_of: Vec<u32>,
    pub normals: Vec<Vector3<f64>>,
    pub warnings: Vec<SamplingWarning>,
}

impl TripletBatch {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }
}

fn edge_angle(ab: &Vector3<f64>, ac: &Vector3<f64>) -> f64 {
    ab.cross(ac).norm().atan2(ab.dot(ac))
}

fn triplet_accepted(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
    group: u32,
    cfg: &SamplingConfig,
) -> bool {
    let ab = b - a;
    let ac = c - a;
    let min_angle = cfg.min_angle_deg.to_radians();
    if ab.norm() <= f64::EPSILON || ac.norm() <= f64::EPSILON {
        return false;
    }
    let angle = edge_angle(&ab, &ac);
    if !(min_angle..=std::f64::consts::PI - min_angle).contains(&angle) {
        return false;
    }
    if group == 0 {
        let bc = c - b;
        if ab.norm() < cfg.min_distance || ac.norm() < cfg.min_distance || bc.norm() < cfg.min_distance
        {
            return false;
        }
    }
    true
}

/// Rejection-samples K triplets per group present in the cloud.
///
/// Each group draws from its own RNG stream derived from
/// `(rng_seed, group)`, so batches are identical no matter how groups are
/// scheduled. A group gets at most `100 * K` attempts; shortfalls are
/// recorded as warnings rather than errors.
pub fn sample_triplets(
    cloud: &PointCloud,
    cfg: &SamplingConfig,
) -> Result<TripletBatch, NormalError> {
    cfg.validate()?;
    let groups = cloud.group_labels();
    let k = cfg.triplets_per_group;

    let per_group = map_indexed(groups.len(), |gi| {
        let group = groups[gi];
        let indices = cloud.indices_of_group(group);
        if indices.len() < 3 {
            return (Vec::new(), vec![SamplingWarning::GroupTooSmall { group }]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, group as u64));
        let mut accepted = Vec::with_capacity(k);
        let mut attempts = 0usize;
        while accepted.len() < k && attempts < 100 * k {
            attempts += 1;
            let pick = rand::seq::index::sample(&mut rng, indices.len(), 3);
            let tri = [indices[pick.index(0)], indices[pick.index(1)], indices[pick.index(2)]];
            let (a, b, c) = (
                &cloud.points[tri[0]],
                &cloud.points[tri[1]],
                &cloud.points[tri[2]],
            );
            if triplet_accepted(a, b, c, group, cfg) {
                accepted.push(tri);
            }
        }
        let mut warnings = Vec::new();
        if accepted.len() < k {
            warnings.push(SamplingWarning::Exhausted {
                group,
                accepted: accepted.len(),
                requested: k,
            });
        }
        (accepted, warnings)
    });

    let mut batch = TripletBatch::default();
    for (gi, (accepted, warnings)) in per_group.into_iter().enumerate() {
        let group = groups[gi];
        for tri in accepted {
            batch.triplets.push(tri);
            batch.group_of.push(group);
        }
        batch.warnings.extend(warnings);
    }
    Ok(batch)
}

/// Computes the normalized cross-product normal of every triplet,
/// camera-facing oriented; triplets with a numerically zero cross product
/// are dropped and counted in the warnings.
pub fn triplet_normals(cloud: &PointCloud, batch: &TripletBatch) -> Result<TripletBatch, NormalError> {
    let mut out = TripletBatch {
        warnings: batch.warnings.clone(),
        ..Default::default()
    };
    let mut dropped = 0usize;
    for (i, tri) in batch.triplets.iter().enumerate() {
        for &idx in tri {
            if idx >= cloud.len() {
                return Err(NormalError::IndexOutOfBounds {
                    index: idx,
                    len: cloud.len(),
                });
            }
        }
        let (a, b, c) = (cloud.points[tri[0]], cloud.points[tri[1]], cloud.points[tri[2]]);
        let cross = (b - a).cross(&(c - a));
        let norm = cross.norm();
        if norm <= 1e-12 {
            dropped += 1;
            continue;
        }
        let (n, _) = orient_camera_facing(cross / norm, 0.0);
        out.triplets.push(*tri);
        out.group_of.push(batch.group_of[i]);
        out.normals.push(n);
    }
    if dropped > 0 {
        out.warnings
            .push(SamplingWarning::DegenerateTriplets { count: dropped });
    }
    Ok(out)
}

/// Target normal field: planar regions carry their fitted plane normal,
/// non-planar pixels a windowed least-squares estimate.
#[derive(Clone, Debug)]
pub struct CombinedNormalMap {
    pub normals: Grid<[f64; 3]>,
    pub valid: Grid<bool>,
    /// Group labels, 0 = non-planar.
    pub region_of: Grid<u32>,
}

impl CombinedNormalMap {
    pub fn normal_at(&self, x: usize, y: usize) -> Option<Vector3<f64>> {
        if self.valid.at(x, y) {
            Some(Vector3::from(self.normals.at(x, y)))
        } else {
            None
        }
    }
}

/// Fitted plane normal per planar region of the ground-truth cloud.
///
/// Regions that are too small or degenerate map to `None`.
pub fn region_plane_normals(
    gt_depth: &DepthMap,
    gt_seg: &Grid<u32>,
    cam: &CameraIntrinsics,
) -> Result<BTreeMap<u32, Option<Vector3<f64>>>, NormalError> {
    let cloud = backproject(gt_depth, cam, Some(gt_seg))?;
    let mut by_group: BTreeMap<u32, Vec<Vector3<f64>>> = BTreeMap::new();
    for (i, &g) in cloud.group_of.iter().enumerate() {
        if g > 0 {
            by_group.entry(g).or_default().push(cloud.points[i]);
        }
    }
    // Labels present in the grid but absent from the cloud (all pixels
    // invalid) still get an entry.
    let mut labels: Vec<u32> = gt_seg.data().iter().copied().filter(|&g| g > 0).collect();
    labels.sort_unstable();
    labels.dedup();

    let mut out = BTreeMap::new();
    for label in labels {
        let normal = by_group
            .get(&label)
            .and_then(|pts| fit_plane_pca(pts).ok())
            .map(|p| p.normal_vec());
        out.insert(label, normal);
    }
    Ok(out)
}

/// Builds the combined normal map from ground-truth depth and planar
/// segmentation.
///
/// Planar pixels are assigned their region's fitted plane normal (bitwise
/// constant within the region); non-planar pixels get the least-squares
/// plane normal of the valid backprojected points in a
/// `(2*window+1)^2` neighborhood. Pixels with fewer than 3 valid neighbors,
/// and regions that cannot be fitted, are invalid.
pub fn combined_normal_map(
    gt_depth: &DepthMap,
    gt_seg: &Grid<u32>,
    cam: &CameraIntrinsics,
    window: usize,
) -> Result<CombinedNormalMap, NormalError> {
    gt_depth.values.check_same_size(gt_seg)?;
    let (w, h) = (gt_depth.width(), gt_depth.height());
    let region_normals = region_plane_normals(gt_depth, gt_seg, cam)?;

    let rows = map_indexed(h, |y| {
        let mut normal_row = vec![[0.0; 3]; w];
        let mut valid_row = vec![false; w];
        for x in 0..w {
            if !gt_depth.valid.at(x, y) {
                continue;
            }
            let label = gt_seg.at(x, y);
            let normal = if label > 0 {
                region_normals.get(&label).copied().flatten()
            } else {
                local_plane_normal(gt_depth, cam, x, y, window)
            };
            if let Some(n) = normal {
                normal_row[x] = [n.x, n.y, n.z];
                valid_row[x] = true;
            }
        }
        (normal_row, valid_row)
    });

    let mut normals = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for (nr, vr) in rows {
        normals.extend(nr);
        valid.extend(vr);
    }
    Ok(CombinedNormalMap {
        normals: Grid::from_vec(w, h, normals),
        valid: Grid::from_vec(w, h, valid),
        region_of: gt_seg.clone(),
    })
}

fn local_plane_normal(
    depth: &DepthMap,
    cam: &CameraIntrinsics,
    x: usize,
    y: usize,
    window: usize,
) -> Option<Vector3<f64>> {
    let (w, h) = (depth.width(), depth.height());
    let r = window as isize;
    let mut pts = Vec::with_capacity((2 * window + 1).pow(2));
    for dy in -r..=r {
        for dx in -r..=r {
            let sx = x as isize + dx;
            let sy = y as isize + dy;
            if sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize {
                continue;
            }
            let (sx, sy) = (sx as usize, sy as usize);
            if let Some(z) = depth.depth_at(sx, sy) {
                pts.push(cam.unproject(sx as f64, sy as f64, z));
            }
        }
    }
    if pts.len() < 3 {
        return None;
    }
    fit_plane_pca(&pts).ok().map(|p| p.normal_vec())
}

/// Plane surface-normal loss value plus sampling bookkeeping.
#[derive(Clone, Copy, Debug)]
pub struct PsnLoss {
    /// Mean of `1 - n_pred . n_gt` over surviving triplets; lies in [0, 2].
    pub value: f64,
    /// Triplets that contributed.
    pub used: usize,
    /// Triplets dropped (invalid ground truth pixel or degenerate normal).
    pub dropped: usize,
}

/// Samples the triplet batch the loss will use: groups come from `gt_seg`,
/// positions from the predicted cloud. Exposed so callers can freeze a batch
/// (e.g. for finite-difference checks) and reuse it across evaluations.
pub fn psn_triplets(
    pred_depth: &DepthMap,
    gt_seg: &Grid<u32>,
    cam: &CameraIntrinsics,
    cfg: &SamplingConfig,
) -> Result<TripletBatch, NormalError> {
    let cloud = backproject(pred_depth, cam, Some(gt_seg))?;
    sample_triplets(&cloud, cfg)
}

/// Plane surface-normal loss with internal sampling. Deterministic for a
/// fixed `cfg.rng_seed`; [`psn_loss_grad`] with the same inputs reuses the
/// identical triplet sample.
pub fn psn_loss(
    pred_depth: &DepthMap,
    gt_depth: &DepthMap,
    gt_seg: &Grid<u32>,
    cam: &CameraIntrinsics,
    cfg: &SamplingConfig,
) -> Result<PsnLoss, NormalError> {
    let batch = psn_triplets(pred_depth, gt_seg, cam, cfg)?;
    psn_loss_for_batch(pred_depth, gt_depth, gt_seg, cam, &batch)
}

/// Analytic gradient of the loss with respect to every predicted depth
/// value, as an H×W grid (zero at pixels touched by no triplet).
pub fn psn_loss_grad(
    pred_depth: &DepthMap,
    gt_depth: &DepthMap,
    gt_seg: &Grid<u32>,
    cam: &CameraIntrinsics,
    cfg: &SamplingConfig,
) -> Result<Grid<f64>, NormalError> {
    let batch = psn_triplets(pred_depth, gt_seg, cam, cfg)?;
    psn_loss_grad_for_batch(pred_depth, gt_depth, gt_seg, cam, &batch)
}

/// Loss evaluation against a frozen triplet batch.
pub fn psn_loss_for_batch(
    pred_depth: &DepthMap,
    gt_depth: &DepthMap,
    gt_seg: &Grid<u32>,
    cam: &CameraIntrinsics,
    batch: &TripletBatch,
) -> Result<PsnLoss, NormalError> {
    let (loss, _) = psn_eval(pred_depth, gt_depth, gt_seg, cam, batch, false)?;
    Ok(loss)
}

/// Gradient evaluation against a frozen triplet batch.
pub fn psn_loss_grad_for_batch(
    pred_depth: &DepthMap,
    gt_depth: &DepthMap,
    gt_seg: &Grid<u32>,
    cam: &CameraIntrinsics,
    batch: &TripletBatch,
) -> Result<Grid<f64>, NormalError> {
    let (_, grad) = psn_eval(pred_depth, gt_depth, gt_seg, cam, batch, true)?;
    Ok(grad.expect("gradient requested"))
}

struct TripletTerm {
    loss: f64,
    /// (pixel, dLoss/dz) for the three vertices; present when grads are on.
    grads: Option<[((u32, u32), f64); 3]>,
}

fn psn_eval(
    pred_depth: &DepthMap,
    gt_depth: &DepthMap,
    gt_seg: &Grid<u32>,
    cam: &CameraIntrinsics,
    batch: &TripletBatch,
    want_grad: bool,
) -> Result<(PsnLoss, Option<Grid<f64>>), NormalError> {
    pred_depth.values.check_same_size(&gt_depth.values)?;
    pred_depth.values.check_same_size(gt_seg)?;
    let cloud = backproject(pred_depth, cam, Some(gt_seg))?;
    for tri in &batch.triplets {
        for &idx in tri {
            if idx >= cloud.len() {
                return Err(NormalError::IndexOutOfBounds {
                    index: idx,
                    len: cloud.len(),
                });
            }
        }
    }
    let region_normals = region_plane_normals(gt_depth, gt_seg, cam)?;

    let terms = map_indexed(batch.triplets.len(), |t| -> Option<TripletTerm> {
        let tri = batch.triplets[t];
        let group = batch.group_of[t];
        let (a, b, c) = (cloud.points[tri[0]], cloud.points[tri[1]], cloud.points[tri[2]]);
        let ab = b - a;
        let ac = c - a;
        let cross = ab.cross(&ac);
        let cross_norm = cross.norm();
        if cross_norm <= 1e-12 {
            return None;
        }
        let unit = cross / cross_norm;
        let sign = if crate::plane::orientation_flip(&unit) {
            -1.0
        } else {
            1.0
        };
        let n_pred = unit * sign;

        let target = if group > 0 {
            region_normals.get(&group).copied().flatten()?
        } else {
            gt_pixel_triplet_normal(gt_depth, cam, &cloud, &tri)?
        };

        let loss = 1.0 - n_pred.dot(&target);
        let grads = want_grad.then(|| {
            // d(loss)/d(cross) through the normalized cross product:
            // -sign * (t - unit (unit . t)) / |cross|.
            let g_c = (target - unit * unit.dot(&target)) * (-sign / cross_norm);
            let ray = |idx: usize| {
                let (u, v) = cloud.pixel_of[idx];
                cam.ray(u as f64, v as f64)
            };
            let dz_a = g_c.dot(&ray(tri[0]).cross(&(ab - ac)));
            let dz_b = g_c.dot(&ray(tri[1]).cross(&ac));
            let dz_c = g_c.dot(&ab.cross(&ray(tri[2])));
            [
                (cloud.pixel_of[tri[0]], dz_a),
                (cloud.pixel_of[tri[1]], dz_b),
                (cloud.pixel_of[tri[2]], dz_c),
            ]
        });
        Some(TripletTerm { loss, grads })
    });

    let mut used = 0usize;
    let mut sum = 0.0;
    let mut grad = want_grad.then(|| Grid::new(pred_depth.width(), pred_depth.height(), 0.0));
    let mut raw: Vec<[((u32, u32), f64); 3]> = Vec::new();
    for term in terms.into_iter().flatten() {
        used += 1;
        sum += term.loss;
        if let Some(g) = term.grads {
            raw.push(g);
        }
    }
    if used == 0 {
        return Err(NormalError::NoTriplets);
    }
    if let Some(grid) = grad.as_mut() {
        let scale = 1.0 / used as f64;
        for tri_grads in raw {
            for ((u, v), dz) in tri_grads {
                let cur = grid.at(u as usize, v as usize);
                grid.set(u as usize, v as usize, cur + dz * scale);
            }
        }
    }
    let loss = PsnLoss {
        value: sum / used as f64,
        used,
        dropped: batch.triplets.len() - used,
    };
    Ok((loss, grad))
}

fn gt_pixel_triplet_normal(
    gt_depth: &DepthMap,
    cam: &CameraIntrinsics,
    cloud: &PointCloud,
    tri: &[usize; 3],
) -> Option<Vector3<f64>> {
    let mut pts = [Vector3::zeros(); 3];
    for (slot, &idx) in pts.iter_mut().zip(tri.iter()) {
        let (u, v) = cloud.pixel_of[idx];
        let z = gt_depth.depth_at(u as usize, v as usize)?;
        *slot = cam.unproject(u as f64, v as f64, z);
    }
    let cross = (pts[1] - pts[0]).cross(&(pts[2] - pts[0]));
    let norm = cross.norm();
    if norm <= 1e-12 {
        return None;
    }
    let (n, _) = orient_camera_facing(cross / norm, 0.0);
    Some(n)
}
