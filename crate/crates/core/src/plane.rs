//! 3D plane models and robust fitting (PCA and RANSAC).

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derive_seed;
use crate::par::map_indexed;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate input: points are colinear or coincident")]
    Degenerate,
    #[error("ransac found no plane with at least 3 inliers")]
    NoConsensus,
    #[error("invalid ransac parameters: {0}")]
    BadParams(String),
}

/// Plane `n · p = d` with a unit, camera-facing normal (z-component ≤ 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane3D {
    /// Unit normal, oriented toward the camera: z ≤ 0, where components
    /// within 1e-9 of zero count as ties and the first decisive component
    /// is made negative.
    pub normal: [f64; 3],
    /// Signed offset `d` in meters.
    pub offset: f64,
    /// Points supporting the fit.
    pub inlier_count: usize,
    /// RMS point-to-plane distance over the supporting points, meters.
    pub rms_residual: f64,
}

impl Plane3D {
    pub fn normal_vec(&self) -> Vector3<f64> {
        Vector3::from(self.normal)
    }

    /// Signed distance of `p` from the plane.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal_vec().dot(p) - self.offset
    }

    /// Angle between this plane's normal and another's, in radians.
    ///
    /// Uses atan2 of the cross/dot pair, which stays accurate for nearly
    /// parallel normals where acos loses digits.
    pub fn normal_angle_to(&self, other: &Plane3D) -> f64 {
        let a = self.normal_vec();
        let b = other.normal_vec();
        a.cross(&b).norm().atan2(a.dot(&b))
    }
}

/// Components this close to zero are treated as exact ties by the
/// orientation rule. Planes parallel to the optical axis produce normals
/// whose z-component is pure roundoff (~1e-16); without the band the flip
/// decision would be a coin toss on noise.
const ORIENT_EPS: f64 = 1e-9;

pub(crate) fn orientation_flip(n: &Vector3<f64>) -> bool {
    if n.z.abs() > ORIENT_EPS {
        n.z > 0.0
    } else if n.x.abs() > ORIENT_EPS {
        n.x > 0.0
    } else {
        n.y > 0.0
    }
}

/// Flips a normal (and offset) so the stored orientation is camera-facing:
/// z-component ≤ 0 (within a 1e-9 tie band resolved by making the first
/// decisively nonzero component negative).
pub fn orient_camera_facing(normal: Vector3<f64>, offset: f64) -> (Vector3<f64>, f64) {
    if orientation_flip(&normal) {
        (-normal, -offset)
    } else {
        (normal, offset)
    }
}

fn rms_distance(points: &[Vector3<f64>], normal: &Vector3<f64>, offset: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let sum: f64 = points
        .iter()
        .map(|p| {
            let d = normal.dot(p) - offset;
            d * d
        })
        .sum();
    (sum / points.len() as f64).sqrt()
}

/// Least-squares plane through `points` via the covariance eigenvector of
/// smallest eigenvalue.
///
/// Fails on fewer than 3 points and on rank-deficient (colinear or
/// coincident) inputs.
pub fn fit_plane_pca(points: &[Vector3<f64>]) -> Result<Plane3D, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let centroid: Vector3<f64> = points.iter().sum::<Vector3<f64>>() / n;

    let mut cov = Matrix3::<f64>::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;

    let eig = cov.symmetric_eigen();
    // Sort eigenpairs ascending by eigenvalue.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let (lam_mid, lam_max) = (
        eig.eigenvalues[order[1]].max(0.0),
        eig.eigenvalues[order[2]].max(0.0),
    );
    // Colinear or coincident points leave no in-plane spread along the
    // second axis.
    if lam_max <= 0.0 || lam_mid <= 1e-12 * lam_max {
        return Err(FitError::Degenerate);
    }

    let normal: Vector3<f64> = eig.eigenvectors.column(order[0]).into();
    let normal = normal.normalize();
    let offset = normal.dot(&centroid);
    let (normal, offset) = orient_camera_facing(normal, offset);

    Ok(Plane3D {
        normal: [normal.x, normal.y, normal.z],
        offset,
        inlier_count: points.len(),
        rms_residual: rms_distance(points, &normal, offset),
    })
}

/// RANSAC parameters. The adaptive threshold used by planar rendering is
/// `max(0.01 m, 1% of the median region depth)`; `fit_plane_ransac` itself
/// always takes an explicit threshold.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RansacParams {
    pub threshold: f64,
    pub iterations: usize,
    pub rng_seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            threshold: 0.01,
            iterations: 256,
            rng_seed: 0,
        }
    }
}

struct Candidate {
    normal: Vector3<f64>,
    offset: f64,
    inliers: usize,
    rms: f64,
    iteration: usize,
}

/// Consensus plane over `points`: the minimal-sample candidate with the most
/// inliers (ties: lower inlier RMS, then earlier iteration), refined by
/// [`fit_plane_pca`] on its inlier set.
///
/// Deterministic for a fixed seed regardless of thread count: candidate
/// samples are drawn up front from the seeded stream and the best candidate
/// is selected by a total order.
pub fn fit_plane_ransac(
    points: &[Vector3<f64>],
    threshold: f64,
    iterations: usize,
    rng_seed: u64,
) -> Result<Plane3D, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    if threshold <= 0.0 {
        return Err(FitError::BadParams(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    if iterations == 0 {
        return Err(FitError::BadParams("iterations must be >= 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, 0x5ac));
    let samples: Vec<[usize; 3]> = (0..iterations)
        .map(|_| {
            let idx = rand::seq::index::sample(&mut rng, points.len(), 3);
            [idx.index(0), idx.index(1), idx.index(2)]
        })
        .collect();

    let candidates = map_indexed(iterations, |it| {
        let [a, b, c] = samples[it];
        let (pa, pb, pc) = (points[a], points[b], points[c]);
        let cross = (pb - pa).cross(&(pc - pa));
        let norm = cross.norm();
        if norm <= 1e-12 {
            return None;
        }
        let normal = cross / norm;
        let offset = normal.dot(&pa);
        let (normal, offset) = orient_camera_facing(normal, offset);

        let mut inliers = 0usize;
        let mut sq_sum = 0.0;
        for p in points {
            let d = normal.dot(p) - offset;
            if d.abs() <= threshold {
                inliers += 1;
                sq_sum += d * d;
            }
        }
        if inliers < 3 {
            return None;
        }
        Some(Candidate {
            normal,
            offset,
            inliers,
            rms: (sq_sum / inliers as f64).sqrt(),
            iteration: it,
        })
    });

    let best = candidates
        .into_iter()
        .flatten()
        .min_by(|a, b| {
            b.inliers
                .cmp(&a.inliers)
                .then(a.rms.partial_cmp(&b.rms).unwrap())
                .then(a.iteration.cmp(&b.iteration))
        })
        .ok_or(FitError::NoConsensus)?;

    let inlier_points: Vec<Vector3<f64>> = points
        .iter()
        .filter(|p| (best.normal.dot(p) - best.offset).abs() <= threshold)
        .copied()
        .collect();
    fit_plane_pca(&inlier_points)
}
