//! Geometry and evaluation toolkit for piece-wise planar depth reconstruction.
//!
//! The crate covers the numeric core of a planar-reconstruction pipeline that
//! treats planes both as segmentation instances and as geometric models:
//!
//! - **geometry**: camera intrinsics, depth backprojection, plane fitting
//!   (PCA and RANSAC) and planar depth rendering ([`camera`], [`cloud`],
//!   [`plane`], [`render`]);
//! - **cross-task losses**: normalized depth-gradient maps and the
//!   depth-gradient segmentation loss ([`gradient`]), triplet sampling,
//!   combined normal maps and the plane surface-normal loss ([`normal`]),
//!   plus the standard focal/dice/RMSE terms and their weighted total
//!   ([`losses`]);
//! - **evaluation**: standard depth metrics, class-agnostic COCO-style
//!   average precision and the iBims planarity / boundary / directed-error
//!   families ([`metrics`]);
//! - **plane-prior attention**: a deterministic reference forward pass of the
//!   mask-to-depth feature fusion block ([`ppa`]);
//! - **harness**: an analytic synthetic scene generator ([`synth`]) and file
//!   formats for depth maps, instance masks, manifests and reports ([`io`]).
//!
//! All operations are pure functions of immutable inputs; randomized ones
//! take explicit seeds and are bit-reproducible. With the `parallel` feature
//! (default) inner loops run on rayon without changing any result: parallel
//! maps preserve index order and every floating-point reduction folds
//! sequentially over ordered partials.

pub mod camera;
pub mod cloud;
pub mod gradient;
pub mod grid;
pub mod io;
pub mod losses;
pub mod masks;
pub mod metrics;
pub mod normal;
pub(crate) mod par;
pub mod plane;
pub mod ppa;
pub mod render;
pub mod synth;

pub use camera::CameraIntrinsics;
pub use cloud::{backproject, PointCloud};
pub use grid::{DepthMap, Grid};
pub use masks::InstanceMaskSet;
pub use plane::{fit_plane_pca, fit_plane_ransac, Plane3D, RansacParams};
pub use render::{render_planar_depth, FitMethod, RenderResult};

/// Derives an independent RNG seed from a base seed and a stream label.
///
/// Used wherever work is split into independently seeded streams (triplet
/// groups, RANSAC restarts, per-image work items) so that results do not
/// depend on scheduling. SplitMix64 finalizer over the combined words.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
