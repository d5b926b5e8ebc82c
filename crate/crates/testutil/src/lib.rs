//! Independent oracles and fixtures shared by the test suites.
//!
//! Everything here recomputes expected values through straight-line loops,
//! deliberately avoiding the library's own code paths: finite differences
//! for gradients, naive convolutions for the fusion block, and explicit
//! per-pixel summations for losses and metrics.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use planarkit::camera::CameraIntrinsics;
use planarkit::cloud::PointCloud;
use planarkit::gradient::GradientMap;
use planarkit::grid::{DepthMap, Grid};
use planarkit::masks::InstanceMaskSet;
use planarkit::normal::TripletBatch;
use planarkit::ppa::{FeatureGrid, PpaWeights};

/// Central finite differences of a scalar function at `point`.
pub fn finite_diff_grad<F>(mut f: F, point: &[f64], eps: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grads = Vec::with_capacity(point.len());
    let mut x = point.to_vec();
    for i in 0..point.len() {
        x[i] = point[i] + eps;
        let plus = f(&x);
        x[i] = point[i] - eps;
        let minus = f(&x);
        x[i] = point[i];
        grads.push((plus - minus) / (2.0 * eps));
    }
    grads
}

/// Relative error with an absolute floor for near-zero references.
pub fn rel_error(actual: f64, reference: f64) -> f64 {
    rel_error_floored(actual, reference, 1e-12)
}

/// Relative error with an explicit near-zero floor, for comparisons where
/// the reference itself carries absolute noise (finite differences).
pub fn rel_error_floored(actual: f64, reference: f64, floor: f64) -> f64 {
    (actual - reference).abs() / reference.abs().max(floor)
}

/// Angle between two vectors in radians, via atan2 for conditioning.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Angle between two unit normals ignoring sign (lines, not rays).
pub fn axis_angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let angle = angle_between(a, b);
    angle.min(std::f64::consts::PI - angle)
}

// ── Sobel / gradient-map oracles ───────────────────────────────────────

/// Direct per-pixel Sobel correlation with replicate padding. Returns
/// (gx, gy, stencil-valid).
pub fn sobel_oracle(depth: &DepthMap) -> (Grid<f64>, Grid<f64>, Grid<bool>) {
    let (w, h) = (depth.width(), depth.height());
    let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    let mut gx = Grid::new(w, h, 0.0);
    let mut gy = Grid::new(w, h, 0.0);
    let mut ok = Grid::new(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let mut sx = 0.0;
            let mut sy = 0.0;
            let mut valid = true;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let px = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                    let py = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                    if !depth.valid.at(px, py) {
                        valid = false;
                    }
                    let v = depth.values.at(px, py);
                    sx += kx[(dy + 1) as usize][(dx + 1) as usize] * v;
                    sy += kx[(dx + 1) as usize][(dy + 1) as usize] * v;
                }
            }
            if valid {
                gx.set(x, y, sx);
                gy.set(x, y, sy);
                ok.set(x, y, true);
            }
        }
    }
    (gx, gy, ok)
}

/// Brute-force normalized gradient map.
pub fn gradient_map_oracle(depth: &DepthMap) -> Grid<f64> {
    let (gx, gy, ok) = sobel_oracle(depth);
    let (w, h) = (depth.width(), depth.height());
    Grid::from_fn(w, h, |x, y| {
        if ok.at(x, y) {
            let d = depth.values.at(x, y);
            (gx.at(x, y).powi(2) + gy.at(x, y).powi(2)) / (d * d)
        } else {
            0.0
        }
    })
}

/// Explicit double-loop DGS summation.
pub fn dgs_oracle(gradient: &GradientMap, masks: &InstanceMaskSet) -> f64 {
    let m = masks.len();
    if m == 0 {
        return 0.0;
    }
    let mut valid_count = 0usize;
    for y in 0..gradient.valid.height() {
        for x in 0..gradient.valid.width() {
            if gradient.valid.at(x, y) {
                valid_count += 1;
            }
        }
    }
    if valid_count == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for mask in &masks.masks {
        let mut acc = 0.0;
        for y in 0..gradient.valid.height() {
            for x in 0..gradient.valid.width() {
                if gradient.valid.at(x, y) {
                    acc += gradient.values.at(x, y) * mask.at(x, y);
                }
            }
        }
        total += acc / valid_count as f64;
    }
    total / m as f64
}

// ── Surface-normal oracles ─────────────────────────────────────────────

/// Camera-facing orientation with the library's 1e-9 tie band: components
/// below the band count as zero and the first decisive one must be
/// negative.
fn orient(n: Vector3<f64>) -> Vector3<f64> {
    const EPS: f64 = 1e-9;
    let flip = if n.z.abs() > EPS {
        n.z > 0.0
    } else if n.x.abs() > EPS {
        n.x > 0.0
    } else {
        n.y > 0.0
    };
    if flip {
        -n
    } else {
        n
    }
}

/// Independent least-squares plane normal: covariance built in a plain
/// loop, smallest eigenvector, camera-facing orientation.
pub fn plane_normal_oracle(points: &[Vector3<f64>]) -> Option<Vector3<f64>> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mut centroid = Vector3::zeros();
    for p in points {
        centroid += p;
    }
    centroid /= n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut best = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] < eig.eigenvalues[best] {
            best = i;
        }
    }
    let v: Vector3<f64> = eig.eigenvectors.column(best).into();
    Some(orient(v.normalize()))
}

/// Independent reimplementation of the surface-normal loss summation for a
/// frozen triplet batch: recomputes predicted normals, planar targets (via
/// its own least-squares fit) and non-planar pixel-triplet targets.
pub fn psn_oracle(
    pred: &DepthMap,
    gt: &DepthMap,
    seg: &Grid<u32>,
    cam: &CameraIntrinsics,
    batch: &TripletBatch,
) -> Option<f64> {
    // Rebuild the predicted cloud in row-major valid-pixel order.
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for y in 0..pred.height() {
        for x in 0..pred.width() {
            if let Some(z) = pred.depth_at(x, y) {
                points.push(cam.unproject(x as f64, y as f64, z));
                pixels.push((x, y));
            }
        }
    }
    // Planar targets from the ground-truth cloud.
    let mut region_points: std::collections::BTreeMap<u32, Vec<Vector3<f64>>> =
        std::collections::BTreeMap::new();
    for y in 0..gt.height() {
        for x in 0..gt.width() {
            let label = seg.at(x, y);
            if label > 0 {
                if let Some(z) = gt.depth_at(x, y) {
                    region_points
                        .entry(label)
                        .or_default()
                        .push(cam.unproject(x as f64, y as f64, z));
                }
            }
        }
    }
    let mut region_normals = std::collections::BTreeMap::new();
    for (label, pts) in &region_points {
        if let Some(n) = plane_normal_oracle(pts) {
            region_normals.insert(*label, n);
        }
    }

    let mut sum = 0.0;
    let mut used = 0usize;
    for (t, tri) in batch.triplets.iter().enumerate() {
        let (a, b, c) = (points[tri[0]], points[tri[1]], points[tri[2]]);
        let cross = (b - a).cross(&(c - a));
        if cross.norm() <= 1e-12 {
            continue;
        }
        let n_pred = orient(cross.normalize());
        let group = batch.group_of[t];
        let target = if group > 0 {
            match region_normals.get(&group) {
                Some(n) => *n,
                None => continue,
            }
        } else {
            let mut gt_pts = [Vector3::zeros(); 3];
            let mut ok = true;
            for (slot, &idx) in gt_pts.iter_mut().zip(tri.iter()) {
                let (x, y) = pixels[idx];
                match gt.depth_at(x, y) {
                    Some(z) => *slot = cam.unproject(x as f64, y as f64, z),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let cross = (gt_pts[1] - gt_pts[0]).cross(&(gt_pts[2] - gt_pts[0]));
            if cross.norm() <= 1e-12 {
                continue;
            }
            orient(cross.normalize())
        };
        sum += 1.0 - n_pred.dot(&target);
        used += 1;
    }
    if used == 0 {
        None
    } else {
        Some(sum / used as f64)
    }
}

// ── Fusion-block oracle ────────────────────────────────────────────────

/// Naive nested-loop forward pass of the attention fusion block.
pub fn ppa_oracle(masks: &InstanceMaskSet, feats: &FeatureGrid, w: &PpaWeights) -> FeatureGrid {
    let m = masks.len();
    let (mw, mh) = (masks.masks[0].width(), masks.masks[0].height());
    let (c, fh, fw) = (feats.channels, feats.height, feats.width);
    let cr = w.reduced_channels;
    let group = c / cr;

    // 1x1 reduce.
    let mut reduced = vec![vec![0.0f64; mw * mh]; cr];
    for rc in 0..cr {
        for y in 0..mh {
            for x in 0..mw {
                let mut acc = 0.0;
                for mc in 0..m {
                    acc += w.reduce_kernel[rc * m + mc] * masks.masks[mc].at(x, y);
                }
                reduced[rc][y * mw + x] = acc;
            }
        }
    }

    // Bilinear resize with half-pixel centers and edge clamping.
    let sample = |plane: &[f64], fx: f64, fy: f64| -> f64 {
        let x0f = fx.floor();
        let y0f = fy.floor();
        let wx = fx - x0f;
        let wy = fy - y0f;
        let fetch = |xi: i64, yi: i64| -> f64 {
            let xc = xi.clamp(0, mw as i64 - 1) as usize;
            let yc = yi.clamp(0, mh as i64 - 1) as usize;
            plane[yc * mw + xc]
        };
        let (x0, y0) = (x0f as i64, y0f as i64);
        (1.0 - wy) * ((1.0 - wx) * fetch(x0, y0) + wx * fetch(x0 + 1, y0))
            + wy * ((1.0 - wx) * fetch(x0, y0 + 1) + wx * fetch(x0 + 1, y0 + 1))
    };
    let mut attention = vec![vec![0.0f64; fw * fh]; cr];
    for rc in 0..cr {
        for y in 0..fh {
            for x in 0..fw {
                let sx = (x as f64 + 0.5) * (mw as f64 / fw as f64) - 0.5;
                let sy = (y as f64 + 0.5) * (mh as f64 / fh as f64) - 0.5;
                attention[rc][y * fw + x] = sample(&reduced[rc], sx, sy);
            }
        }
    }

    // Concatenate attended and raw features.
    let cin = 2 * c;
    let mut stacked = vec![0.0f64; cin * fh * fw];
    for ch in 0..c {
        for y in 0..fh {
            for x in 0..fw {
                let att = attention[ch / group][y * fw + x];
                stacked[(ch * fh + y) * fw + x] = feats.at(ch, x, y) * att;
                stacked[((c + ch) * fh + y) * fw + x] = feats.at(ch, x, y);
            }
        }
    }

    // 3x3 convolution with replicate padding, bias, rectification.
    let mut out = FeatureGrid::zeros(w.out_channels, fh, fw);
    for co in 0..w.out_channels {
        for y in 0..fh {
            for x in 0..fw {
                let mut acc = w.fuse_bias[co];
                for ci in 0..cin {
                    for ky in 0..3usize {
                        for kx in 0..3usize {
                            let sx = (x as i64 + kx as i64 - 1).clamp(0, fw as i64 - 1) as usize;
                            let sy = (y as i64 + ky as i64 - 1).clamp(0, fh as i64 - 1) as usize;
                            acc += w.fuse_kernel[((co * cin + ci) * 3 + ky) * 3 + kx]
                                * stacked[(ci * fh + sy) * fw + sx];
                        }
                    }
                }
                out.set(co, x, y, acc.max(0.0));
            }
        }
    }
    out
}

// ── Fixture builders ───────────────────────────────────────────────────

/// Uniformly random unit vector.
pub fn random_unit_vector<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Points on a random plane through `center`, plus the generating
/// (camera-facing) normal. Jitter spreads the points in-plane.
pub fn random_plane_points<R: Rng>(
    rng: &mut R,
    n: usize,
    center: Vector3<f64>,
    extent: f64,
) -> (Vec<Vector3<f64>>, Vector3<f64>) {
    let normal = orient(random_unit_vector(rng));
    let helper = if normal.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = normal.cross(&helper).normalize();
    let e2 = normal.cross(&e1).normalize();
    let pts = (0..n)
        .map(|_| {
            center
                + e1 * rng.random_range(-extent..extent)
                + e2 * rng.random_range(-extent..extent)
        })
        .collect();
    (pts, normal)
}

/// A full-grid mask set with the given soft masks, unit scores and
/// full-image boxes.
pub fn mask_set_from(masks: Vec<Grid<f64>>) -> InstanceMaskSet {
    let n = masks.len();
    let (w, h) = (masks[0].width(), masks[0].height());
    InstanceMaskSet {
        masks,
        scores: vec![1.0; n],
        boxes: vec![
            planarkit::masks::BoundingBox {
                x0: 0.0,
                y0: 0.0,
                x1: w as f64,
                y1: h as f64,
            };
            n
        ],
        labels: vec![0; n],
    }
}

/// Random fusion weights with entries in [-1, 1].
pub fn random_ppa_weights<R: Rng>(
    rng: &mut R,
    mask_channels: usize,
    reduced_channels: usize,
    feat_channels: usize,
    out_channels: usize,
) -> PpaWeights {
    let fuse_in = 2 * feat_channels;
    PpaWeights {
        reduce_kernel: (0..reduced_channels * mask_channels)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
        mask_channels,
        reduced_channels,
        fuse_kernel: (0..out_channels * fuse_in * 9)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
        fuse_in_channels: fuse_in,
        out_channels,
        fuse_bias: (0..out_channels).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

/// Reconstructs the row-major pixel list of the valid-pixel cloud the
/// library builds, for mapping triplet indices back to pixels in tests.
pub fn valid_pixels(depth: &DepthMap) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..depth.height() {
        for x in 0..depth.width() {
            if depth.valid.at(x, y) {
                out.push((x, y));
            }
        }
    }
    out
}

/// Cloud accessor mirroring the library's backprojection, used when an
/// oracle needs 3D points without touching the implementation under test.
pub fn backproject_oracle(
    depth: &DepthMap,
    cam: &CameraIntrinsics,
    seg: Option<&Grid<u32>>,
) -> PointCloud {
    let mut cloud = PointCloud::default();
    for y in 0..depth.height() {
        for x in 0..depth.width() {
            if let Some(z) = depth.depth_at(x, y) {
                cloud.points.push(cam.unproject(x as f64, y as f64, z));
                cloud.pixel_of.push((x as u32, y as u32));
                cloud.group_of.push(seg.map_or(0, |s| s.at(x, y)));
            }
        }
    }
    cloud
}
