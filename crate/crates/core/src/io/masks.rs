//! Instance segmentation files: id grids as 16-bit PNG, JSON sidecars with
//! scores/boxes/labels, and soft candidate masks as 8-bit PNGs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::masks::{BoundingBox, InstanceMaskSet};

use super::{io_err, IoError};

/// Writes an instance-id grid (0 = background) as 16-bit grayscale PNG.
pub fn write_seg_png(path: &Path, seg: &Grid<u32>) -> Result<(), IoError> {
    let (w, h) = (seg.width(), seg.height());
    let mut buf: Vec<u16> = Vec::with_capacity(w * h);
    for &id in seg.data() {
        if id > u16::MAX as u32 {
            return Err(IoError::Validation {
                path: path.to_path_buf(),
                field: "instance_id".into(),
                message: format!("id {id} exceeds 16-bit range"),
            });
        }
        buf.push(id as u16);
    }
    let img: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
        image::ImageBuffer::from_vec(w as u32, h as u32, buf).expect("buffer sized above");
    img.save(path).map_err(|e| IoError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads an instance-id grid written by [`write_seg_png`].
pub fn read_seg_png(path: &Path) -> Result<Grid<u32>, IoError> {
    let dynimg = image::open(path).map_err(|e| IoError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let img = match dynimg {
        image::DynamicImage::ImageLuma16(img) => img,
        other => {
            return Err(IoError::Image {
                path: path.to_path_buf(),
                message: format!("expected 16-bit grayscale PNG, got {:?}", other.color()),
            })
        }
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut seg = Grid::new(w, h, 0u32);
    for (x, y, p) in img.enumerate_pixels() {
        seg.set(x as usize, y as usize, p.0[0] as u32);
    }
    Ok(seg)
}

/// Per-instance annotations stored next to a segmentation grid. Entry `i`
/// describes instance id `i + 1`; all three arrays run to the maximum id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SegSidecar {
    pub scores: Vec<f64>,
    pub boxes: Vec<[f64; 4]>,
    pub labels: Vec<u32>,
}

impl SegSidecar {
    pub fn from_mask_set(set: &InstanceMaskSet) -> Self {
        Self {
            scores: set.scores.clone(),
            boxes: set
                .boxes
                .iter()
                .map(|b| [b.x0, b.y0, b.x1, b.y1])
                .collect(),
            labels: set.labels.clone(),
        }
    }

    /// Checks array lengths against the maximum instance id of `seg`.
    pub fn validate(&self, seg: &Grid<u32>, path: &Path) -> Result<(), IoError> {
        let max_id = seg.data().iter().copied().max().unwrap_or(0) as usize;
        for (field, len) in [
            ("scores", self.scores.len()),
            ("boxes", self.boxes.len()),
            ("labels", self.labels.len()),
        ] {
            if len != max_id {
                return Err(IoError::Validation {
                    path: path.to_path_buf(),
                    field: field.into(),
                    message: format!("length {len} does not match max instance id {max_id}"),
                });
            }
        }
        Ok(())
    }

    /// Combines the sidecar with an id grid into a binary mask set.
    pub fn into_mask_set(self, seg: &Grid<u32>) -> InstanceMaskSet {
        let mut set = InstanceMaskSet::from_instance_ids(seg, Some(&self.scores));
        for (i, b) in self.boxes.iter().enumerate().take(set.len()) {
            set.boxes[i] = BoundingBox {
                x0: b[0],
                y0: b[1],
                x1: b[2],
                y1: b[3],
            };
        }
        for (i, &l) in self.labels.iter().enumerate().take(set.len()) {
            set.labels[i] = l;
        }
        set
    }
}

pub fn write_sidecar(path: &Path, sidecar: &SegSidecar) -> Result<(), IoError> {
    let json = serde_json::to_string_pretty(sidecar).expect("sidecar serialization");
    fs::write(path, json).map_err(|e| io_err(path, e))
}

pub fn read_sidecar(path: &Path) -> Result<SegSidecar, IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        offset: e.column(),
        message: e.to_string(),
    })
}

/// Writes each soft candidate mask as an 8-bit PNG (`value / 255`), named
/// `{stem}_mask{index}.png`; returns the written paths.
pub fn write_soft_masks(
    dir: &Path,
    stem: &str,
    set: &InstanceMaskSet,
) -> Result<Vec<PathBuf>, IoError> {
    let mut paths = Vec::with_capacity(set.len());
    for (i, mask) in set.masks.iter().enumerate() {
        let path = dir.join(format!("{stem}_mask{i}.png"));
        let (w, h) = (mask.width(), mask.height());
        let buf: Vec<u8> = mask
            .data()
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        let img: image::GrayImage =
            image::ImageBuffer::from_vec(w as u32, h as u32, buf).expect("buffer sized above");
        img.save(&path).map_err(|e| IoError::Image {
            path: path.clone(),
            message: e.to_string(),
        })?;
        paths.push(path);
    }
    Ok(paths)
}

/// Reads one soft mask back into `[0, 1]` (quantized to 1/255).
pub fn read_soft_mask(path: &Path) -> Result<Grid<f64>, IoError> {
    let img = image::open(path)
        .map_err(|e| IoError::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut grid = Grid::new(w, h, 0.0);
    for (x, y, p) in img.enumerate_pixels() {
        grid.set(x as usize, y as usize, p.0[0] as f64 / 255.0);
    }
    Ok(grid)
}
