//! Pinhole camera intrinsics.
//!
//! Convention used throughout the crate: the camera looks along +z, x points
//! right, y points down (matching image rows), origin at the optical center.
//! A pixel (u, v) at depth z backprojects to
//! `(z·(u−cx)/fx, z·(v−cy)/fy, z)`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("invalid intrinsics: {0}")]
    Invalid(String),
}

/// Pinhole intrinsics in pixel units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, CameraError> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(CameraError::Invalid(format!(
                "focal lengths must be positive, got fx={}, fy={}",
                self.fx, self.fy
            )));
        }
        if !(0.0 <= self.cx && self.cx < self.width as f64) {
            return Err(CameraError::Invalid(format!(
                "principal point cx={} outside [0, {})",
                self.cx, self.width
            )));
        }
        if !(0.0 <= self.cy && self.cy < self.height as f64) {
            return Err(CameraError::Invalid(format!(
                "principal point cy={} outside [0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }

    /// Unnormalized ray direction through pixel (u, v); its z-component is 1,
    /// so depth z lands on the 3D point `z * ray`.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Backprojects pixel (u, v) at depth z.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Vector3<f64> {
        self.ray(u, v) * z
    }

    /// Projects a camera-frame point to pixel coordinates (requires z > 0).
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }
}
