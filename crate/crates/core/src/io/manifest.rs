//! Dataset manifests (JSON lines, one record per image) and the per-image
//! ground-truth metadata record.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::plane::Plane3D;
use crate::synth::Sphere;

use super::{io_err, IoError};

/// One dataset record. Paths are stored relative to the manifest file.
/// `depth_path`/`seg_path` play the prediction role; `gt_depth_path` and
/// the metadata record hold the ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub depth_path: String,
    pub gt_depth_path: String,
    pub seg_path: String,
    pub meta_path: String,
    pub intrinsics_path: String,
}

impl ManifestEntry {
    pub fn resolve(&self, manifest_dir: &Path, rel: &str) -> PathBuf {
        manifest_dir.join(rel)
    }
}

/// Ground-truth metadata: where the ground-truth segmentation lives, the
/// exact plane model per planar instance (index = id - 1) and the sphere,
/// if any.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneMeta {
    pub gt_seg_path: String,
    pub planes: Vec<Plane3D>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere: Option<Sphere>,
}

/// Reads a JSONL manifest, checking id uniqueness and that every referenced
/// file exists relative to the manifest location.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::new();
    let mut offset = 0usize;
    for line in text.lines() {
        let line_offset = offset;
        offset += line.len() + 1;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            offset: line_offset + e.column(),
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    let mut ids: Vec<&str> = entries.iter().map(|e| e.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(dup) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(IoError::Validation {
            path: path.to_path_buf(),
            field: "id".into(),
            message: format!("duplicate id `{}`", dup[0]),
        });
    }
    for entry in &entries {
        for (field, rel) in [
            ("depth_path", &entry.depth_path),
            ("gt_depth_path", &entry.gt_depth_path),
            ("seg_path", &entry.seg_path),
            ("meta_path", &entry.meta_path),
            ("intrinsics_path", &entry.intrinsics_path),
        ] {
            let p = dir.join(rel);
            if !p.exists() {
                return Err(IoError::Validation {
                    path: path.to_path_buf(),
                    field: field.into(),
                    message: format!("referenced file `{}` does not exist", p.display()),
                });
            }
        }
    }
    Ok(entries)
}

/// Writes a JSONL manifest, one record per line.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), IoError> {
    let mut out = String::new();
    for entry in entries {
        out.push_str(&serde_json::to_string(entry).expect("manifest serialization"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn write_scene_meta(path: &Path, meta: &SceneMeta) -> Result<(), IoError> {
    let json = serde_json::to_string_pretty(meta).expect("meta serialization");
    fs::write(path, json).map_err(|e| io_err(path, e))
}

pub fn read_scene_meta(path: &Path) -> Result<SceneMeta, IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        offset: e.column(),
        message: e.to_string(),
    })
}

pub fn write_intrinsics(path: &Path, cam: &CameraIntrinsics) -> Result<(), IoError> {
    let json = serde_json::to_string_pretty(cam).expect("intrinsics serialization");
    fs::write(path, json).map_err(|e| io_err(path, e))
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics, IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let cam: CameraIntrinsics = serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        offset: e.column(),
        message: e.to_string(),
    })?;
    cam.validate().map_err(|e| IoError::Validation {
        path: path.to_path_buf(),
        field: "intrinsics".into(),
        message: e.to_string(),
    })?;
    Ok(cam)
}
