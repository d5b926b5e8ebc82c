//! File formats: depth maps (16-bit PNG / PFM / raw f64), instance masks
//! with JSON sidecars, dataset manifests, flat TOML configs and the
//! attention-weights binary container.

mod config;
mod depth;
mod manifest;
mod masks;
mod pfm;
mod weights;

pub use config::ToolkitConfig;
pub use depth::{
    read_depth, read_depth_f64, read_depth_pfm, read_depth_png16, write_depth, write_depth_f64,
    write_depth_pfm, write_depth_png16, write_gradient_pfm, write_normal_map_pfm,
    write_normal_map_png,
};
pub use manifest::{
    read_intrinsics, read_manifest, read_scene_meta, write_intrinsics, write_manifest,
    write_scene_meta, ManifestEntry, SceneMeta,
};
pub use masks::{
    read_seg_png, read_sidecar, read_soft_mask, write_seg_png, write_sidecar, write_soft_masks,
    SegSidecar,
};
pub use pfm::{read_pfm, write_pfm, PfmImage};
pub use weights::{read_ppa_weights, write_ppa_weights};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error at byte {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },
    #[error("{path}: invalid field `{field}`: {message}")]
    Validation {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{path}: image codec error: {message}")]
    Image { path: PathBuf, message: String },
    #[error("unsupported depth format `{extension}` (expected png, pfm or d64)")]
    UnsupportedFormat { extension: String },
}

pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> IoError {
    IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}
