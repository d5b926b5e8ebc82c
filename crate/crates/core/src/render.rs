//! Planar depth rendering: replace per-instance depth with ray-plane
//! intersections of a plane fitted to that instance.

use nalgebra::Vector3;
use thiserror::Error;

use crate::camera::CameraIntrinsics;
use crate::cloud::CloudError;
use crate::grid::{DepthMap, GridError};
use crate::masks::{InstanceMaskSet, MaskError};
use crate::plane::{fit_plane_pca, fit_plane_ransac, FitError, Plane3D, RansacParams};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

/// Plane estimator used per instance.
#[derive(Clone, Copy, Debug)]
pub enum FitMethod {
    Pca,
    /// RANSAC with the given iteration count and seed. `threshold: None`
    /// selects the adaptive rule `max(0.01 m, 1% of median region depth)`.
    Ransac {
        iterations: usize,
        threshold: Option<f64>,
        rng_seed: u64,
    },
}

impl FitMethod {
    pub fn ransac_default(rng_seed: u64) -> Self {
        let p = RansacParams::default();
        FitMethod::Ransac {
            iterations: p.iterations,
            threshold: None,
            rng_seed,
        }
    }
}

/// Output of [`render_planar_depth`].
#[derive(Clone, Debug)]
pub struct RenderResult {
    pub depth: DepthMap,
    /// Planes fitted per rendered instance, index-aligned with the mask set
    /// (None for skipped instances).
    pub planes: Vec<Option<Plane3D>>,
    /// Instances skipped for having fewer than 3 valid pixels or a
    /// degenerate fit.
    pub skipped: Vec<usize>,
}

/// Renders each masked region as its fitted plane.
///
/// Masks are binarized at 0.5; where masks overlap, the pixel belongs to the
/// highest-scoring instance (ties: lower stack index). For each owned pixel
/// the rendered depth is the ray-plane intersection
/// `z = d / (n · ray(u, v))`; pixels with a near-parallel ray
/// (|denominator| < 1e-6) or a non-positive intersection keep their original
/// depth. Unmasked pixels are untouched.
pub fn render_planar_depth(
    depth: &DepthMap,
    masks: &InstanceMaskSet,
    cam: &CameraIntrinsics,
    fit: FitMethod,
) -> Result<RenderResult, RenderError> {
    let (w, h) = (depth.width(), depth.height());
    masks.validate(w, h)?;

    // Resolve overlaps: each pixel goes to the best-scoring covering mask.
    let mut owner: Vec<Option<usize>> = vec![None; w * h];
    let mut order: Vec<usize> = (0..masks.len()).collect();
    order.sort_by(|&a, &b| {
        masks.scores[b]
            .partial_cmp(&masks.scores[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    for &m in &order {
        let mask = &masks.masks[m];
        for y in 0..h {
            for x in 0..w {
                if mask.at(x, y) > 0.5 && owner[y * w + x].is_none() {
                    owner[y * w + x] = Some(m);
                }
            }
        }
    }

    let mut out = depth.clone();
    let mut planes = vec![None; masks.len()];
    let mut skipped = Vec::new();

    for m in 0..masks.len() {
        let mut pixels = Vec::new();
        let mut points = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if owner[y * w + x] == Some(m) {
                    pixels.push((x, y));
                    if let Some(z) = depth.depth_at(x, y) {
                        points.push(cam.unproject(x as f64, y as f64, z));
                    }
                }
            }
        }
        if points.len() < 3 {
            skipped.push(m);
            continue;
        }

        let fitted = match fit {
            FitMethod::Pca => fit_plane_pca(&points),
            FitMethod::Ransac {
                iterations,
                threshold,
                rng_seed,
            } => {
                let thr = threshold.unwrap_or_else(|| adaptive_threshold(&points));
                fit_plane_ransac(&points, thr, iterations, crate::derive_seed(rng_seed, m as u64))
            }
        };
        let plane = match fitted {
            Ok(p) => p,
            Err(FitError::Degenerate) | Err(FitError::TooFewPoints(_)) | Err(FitError::NoConsensus) => {
                skipped.push(m);
                continue;
            }
            Err(FitError::BadParams(_)) => {
                skipped.push(m);
                continue;
            }
        };
        let n = plane.normal_vec();

        for &(x, y) in &pixels {
            let ray: Vector3<f64> = cam.ray(x as f64, y as f64);
            let denom = n.dot(&ray);
            if denom.abs() < 1e-6 {
                continue;
            }
            let z = plane.offset / denom;
            if z <= 0.0 {
                continue;
            }
            out.values.set(x, y, z);
            out.valid.set(x, y, true);
        }
        planes[m] = Some(plane);
    }

    Ok(RenderResult {
        depth: out,
        planes,
        skipped,
    })
}

/// Adaptive RANSAC threshold: `max(0.01 m, 1% of median point depth)`.
fn adaptive_threshold(points: &[Vector3<f64>]) -> f64 {
    let mut depths: Vec<f64> = points.iter().map(|p| p.z).collect();
    depths.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = depths[depths.len() / 2];
    (0.01_f64).max(0.01 * median)
}
