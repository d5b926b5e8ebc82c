//! Flat TOML configuration mirroring every tunable threshold and weight.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::losses::LossWeights;
use crate::metrics::DbeParams;
use crate::normal::SamplingConfig;
use crate::render::FitMethod;

use super::{io_err, IoError};

/// Every knob in one flat document; unspecified keys take the defaults
/// below. Environment variables are never consulted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    /// Triplets per group (K).
    pub triplets_per_group: usize,
    /// Colinearity bound, degrees.
    pub min_angle_deg: f64,
    /// Non-planar pairwise distance bound, meters.
    pub min_distance: f64,
    /// Local normal estimation window radius, pixels.
    pub window: usize,
    /// Total-loss weights.
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Focal loss parameters.
    pub focal_alpha: f64,
    pub focal_gamma: f64,
    /// Plane fitting for rendering: "pca" or "ransac".
    pub render_fit: String,
    pub ransac_iterations: usize,
    /// Absolute RANSAC threshold in meters; omit for the adaptive rule.
    pub ransac_threshold: Option<f64>,
    /// Binarization threshold for soft masks.
    pub mask_threshold: f64,
    /// Boundary-metric edge threshold and truncation.
    pub dbe_edge_threshold: f64,
    pub dbe_truncation: f64,
    /// Directed-depth-error reference distance, meters.
    pub dde_plane_distance: f64,
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        Self {
            triplets_per_group: 100,
            min_angle_deg: 15.0,
            min_distance: 0.3,
            window: 3,
            alpha: 3.0,
            beta: 5.0,
            gamma: 1.0,
            delta: 1.0,
            focal_alpha: 0.25,
            focal_gamma: 2.0,
            render_fit: "pca".into(),
            ransac_iterations: 256,
            ransac_threshold: None,
            mask_threshold: 0.5,
            dbe_edge_threshold: 0.05,
            dbe_truncation: 10.0,
            dde_plane_distance: 3.0,
        }
    }
}

impl ToolkitConfig {
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let cfg: ToolkitConfig = toml::from_str(&text).map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            offset: e.span().map(|s| s.start).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        cfg.validate(path)?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        let text = toml::to_string_pretty(self).expect("config serialization");
        fs::write(path, text).map_err(|e| io_err(path, e))
    }

    fn validate(&self, path: &Path) -> Result<(), IoError> {
        if self.render_fit != "pca" && self.render_fit != "ransac" {
            return Err(IoError::Validation {
                path: path.to_path_buf(),
                field: "render_fit".into(),
                message: format!("`{}` is neither `pca` nor `ransac`", self.render_fit),
            });
        }
        Ok(())
    }

    pub fn sampling_config(&self, rng_seed: u64) -> SamplingConfig {
        SamplingConfig {
            triplets_per_group: self.triplets_per_group,
            min_angle_deg: self.min_angle_deg,
            min_distance: self.min_distance,
            rng_seed,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            delta: self.delta,
        }
    }

    pub fn dbe_params(&self) -> DbeParams {
        DbeParams {
            edge_threshold: self.dbe_edge_threshold,
            truncation: self.dbe_truncation,
        }
    }

    pub fn fit_method(&self, rng_seed: u64) -> FitMethod {
        if self.render_fit == "ransac" {
            FitMethod::Ransac {
                iterations: self.ransac_iterations,
                threshold: self.ransac_threshold,
                rng_seed,
            }
        } else {
            FitMethod::Pca
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_toml() {
        let dir = std::env::temp_dir().join("planarkit-config-io");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("config.toml");
        let cfg = ToolkitConfig::default();
        cfg.save(&path).unwrap();
        assert_eq!(ToolkitConfig::load(&path).unwrap(), cfg);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let dir = std::env::temp_dir().join("planarkit-config-io");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("partial.toml");
        std::fs::write(&path, "alpha = 2.0\ntriplets_per_group = 7\n").unwrap();
        let cfg = ToolkitConfig::load(&path).unwrap();
        assert_eq!(cfg.alpha, 2.0);
        assert_eq!(cfg.triplets_per_group, 7);
        assert_eq!(cfg.beta, 5.0);
    }

    #[test]
    fn unknown_keys_and_bad_fit_are_rejected() {
        let dir = std::env::temp_dir().join("planarkit-config-io");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.toml");
        std::fs::write(&path, "no_such_key = 1\n").unwrap();
        assert!(matches!(ToolkitConfig::load(&path), Err(IoError::Parse { .. })));

        std::fs::write(&path, "render_fit = \"hough\"\n").unwrap();
        assert!(matches!(
            ToolkitConfig::load(&path),
            Err(IoError::Validation { field, .. }) if field == "render_fit"
        ));
    }
}
