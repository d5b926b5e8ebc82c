//! Depth map file formats and float-map exports.
//!
//! - 16-bit grayscale PNG, millimeters, 0 = invalid (dataset interchange);
//! - PFM, 32-bit float meters, non-positive = invalid (lossless at f32);
//! - raw `d64` container, 64-bit float meters (lossless interchange for
//!   pipelines whose planarity checks sit below f32 resolution).

use std::fs;
use std::path::Path;

use crate::gradient::GradientMap;
use crate::grid::{DepthMap, Grid};
use crate::normal::CombinedNormalMap;

use super::pfm::{read_pfm, write_pfm, PfmImage};
use super::{io_err, IoError};

/// Writes millimeter-quantized 16-bit PNG; invalid pixels become 0.
pub fn write_depth_png16(path: &Path, depth: &DepthMap) -> Result<(), IoError> {
    let (w, h) = (depth.width(), depth.height());
    let mut buf: Vec<u16> = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let v = if depth.valid.data()[i] {
            (depth.values.data()[i] * 1000.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        buf.push(v);
    }
    let img: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
        image::ImageBuffer::from_vec(w as u32, h as u32, buf).expect("buffer sized above");
    img.save(path).map_err(|e| IoError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads a millimeter 16-bit PNG written by [`write_depth_png16`].
pub fn read_depth_png16(path: &Path) -> Result<DepthMap, IoError> {
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
    let mut values = Grid::new(w, h, 0.0);
    let mut valid = Grid::new(w, h, false);
    for (x, y, p) in img.enumerate_pixels() {
        let mm = p.0[0];
        if mm > 0 {
            values.set(x as usize, y as usize, mm as f64 / 1000.0);
            valid.set(x as usize, y as usize, true);
        }
    }
    Ok(DepthMap::new(values, valid))
}

/// Writes 32-bit float PFM meters; invalid pixels become 0.
pub fn write_depth_pfm(path: &Path, depth: &DepthMap) -> Result<(), IoError> {
    let (w, h) = (depth.width(), depth.height());
    let data: Vec<f32> = (0..w * h)
        .map(|i| {
            if depth.valid.data()[i] {
                depth.values.data()[i] as f32
            } else {
                0.0
            }
        })
        .collect();
    write_pfm(
        path,
        &PfmImage {
            width: w,
            height: h,
            channels: 1,
            data,
        },
    )
}

/// Reads a grayscale PFM as depth; non-positive or non-finite = invalid.
pub fn read_depth_pfm(path: &Path) -> Result<DepthMap, IoError> {
    let img = read_pfm(path)?;
    if img.channels != 1 {
        return Err(IoError::Parse {
            path: path.to_path_buf(),
            offset: 0,
            message: "depth PFM must be grayscale (Pf)".into(),
        });
    }
    let values = Grid::from_vec(
        img.width,
        img.height,
        img.data.iter().map(|&v| v as f64).collect(),
    );
    Ok(DepthMap::from_values(values))
}

const D64_MAGIC: &[u8; 4] = b"DP64";

/// Writes the raw 64-bit container: magic, version, dimensions, then
/// row-major little-endian f64 meters (invalid pixels as 0).
pub fn write_depth_f64(path: &Path, depth: &DepthMap) -> Result<(), IoError> {
    let (w, h) = (depth.width(), depth.height());
    let mut out = Vec::with_capacity(16 + w * h * 8);
    out.extend_from_slice(D64_MAGIC);
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    for i in 0..w * h {
        let v = if depth.valid.data()[i] {
            depth.values.data()[i]
        } else {
            0.0
        };
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Reads the raw 64-bit container.
pub fn read_depth_f64(path: &Path) -> Result<DepthMap, IoError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let parse = |offset: usize, message: &str| IoError::Parse {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    };
    if bytes.len() < 16 {
        return Err(parse(0, "file shorter than header"));
    }
    if &bytes[0..4] != D64_MAGIC {
        return Err(parse(0, "bad magic, expected DP64"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != 1 {
        return Err(parse(4, "unsupported version"));
    }
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if w == 0 || h == 0 || w.saturating_mul(h) > (1 << 30) {
        return Err(parse(8, "unreasonable dimensions"));
    }
    let need = 16 + w * h * 8;
    if bytes.len() < need {
        return Err(parse(16, "truncated sample data"));
    }
    let mut values = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let o = 16 + i * 8;
        values.push(f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap()));
    }
    Ok(DepthMap::from_values(Grid::from_vec(w, h, values)))
}

/// Dispatches on the file extension: `.png`, `.pfm` or `.d64`.
pub fn read_depth(path: &Path) -> Result<DepthMap, IoError> {
    match extension(path)?.as_str() {
        "png" => read_depth_png16(path),
        "pfm" => read_depth_pfm(path),
        "d64" => read_depth_f64(path),
        other => Err(IoError::UnsupportedFormat {
            extension: other.to_string(),
        }),
    }
}

/// Dispatches on the file extension: `.png`, `.pfm` or `.d64`.
pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<(), IoError> {
    match extension(path)?.as_str() {
        "png" => write_depth_png16(path, depth),
        "pfm" => write_depth_pfm(path, depth),
        "d64" => write_depth_f64(path, depth),
        other => Err(IoError::UnsupportedFormat {
            extension: other.to_string(),
        }),
    }
}

fn extension(path: &Path) -> Result<String, IoError> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .ok_or(IoError::UnsupportedFormat {
            extension: String::new(),
        })
}

/// Exports a gradient map as grayscale PFM (invalid pixels as 0).
pub fn write_gradient_pfm(path: &Path, map: &GradientMap) -> Result<(), IoError> {
    let (w, h) = (map.values.width(), map.values.height());
    let data = (0..w * h).map(|i| map.values.data()[i] as f32).collect();
    write_pfm(
        path,
        &PfmImage {
            width: w,
            height: h,
            channels: 1,
            data,
        },
    )
}

/// Exports a normal map as 3-channel PFM (invalid pixels as zero vectors).
pub fn write_normal_map_pfm(path: &Path, map: &CombinedNormalMap) -> Result<(), IoError> {
    let (w, h) = (map.normals.width(), map.normals.height());
    let mut data = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        let n = if map.valid.data()[i] {
            map.normals.data()[i]
        } else {
            [0.0; 3]
        };
        data.extend(n.iter().map(|&v| v as f32));
    }
    write_pfm(
        path,
        &PfmImage {
            width: w,
            height: h,
            channels: 3,
            data,
        },
    )
}

/// Exports a normal map for visualization: `n -> (n + 1) / 2 * 255` RGB.
pub fn write_normal_map_png(path: &Path, map: &CombinedNormalMap) -> Result<(), IoError> {
    let (w, h) = (map.normals.width(), map.normals.height());
    let mut buf = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        let n = if map.valid.data()[i] {
            map.normals.data()[i]
        } else {
            [-1.0; 3]
        };
        for c in n {
            buf.push(((c + 1.0) / 2.0 * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    let img: image::RgbImage =
        image::ImageBuffer::from_vec(w as u32, h as u32, buf).expect("buffer sized above");
    img.save(path).map_err(|e| IoError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
