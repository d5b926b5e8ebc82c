//! Binary container for attention-fusion weights: a fixed header of
//! little-endian u32 dimensions followed by all kernels as little-endian
//! 32-bit floats.
//!
//! Layout: magic `PPAW`, version, mask channels M, reduced channels C',
//! fuse input channels, output channels, then the reduce kernel (C'*M),
//! the fuse kernel (C_out * fuse_in * 9) and the bias (C_out).

use std::fs;
use std::path::Path;

use crate::ppa::PpaWeights;

use super::{io_err, IoError};

const MAGIC: &[u8; 4] = b"PPAW";
const VERSION: u32 = 1;

pub fn write_ppa_weights(path: &Path, w: &PpaWeights) -> Result<(), IoError> {
    w.validate().map_err(|e| IoError::Validation {
        path: path.to_path_buf(),
        field: "weights".into(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for dim in [
        VERSION,
        w.mask_channels as u32,
        w.reduced_channels as u32,
        w.fuse_in_channels as u32,
        w.out_channels as u32,
    ] {
        out.extend_from_slice(&dim.to_le_bytes());
    }
    for v in w
        .reduce_kernel
        .iter()
        .chain(&w.fuse_kernel)
        .chain(&w.fuse_bias)
    {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_ppa_weights(path: &Path) -> Result<PpaWeights, IoError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let parse = |offset: usize, message: String| IoError::Parse {
        path: path.to_path_buf(),
        offset,
        message,
    };
    if bytes.len() < 24 {
        return Err(parse(0, "file shorter than header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(parse(0, "bad magic, expected PPAW".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + i * 4..8 + i * 4].try_into().unwrap());
    if word(0) != VERSION {
        return Err(parse(4, format!("unsupported version {}", word(0))));
    }
    let mask_channels = word(1) as usize;
    let reduced_channels = word(2) as usize;
    let fuse_in_channels = word(3) as usize;
    let out_channels = word(4) as usize;
    let counts = [
        reduced_channels * mask_channels,
        out_channels * fuse_in_channels * 9,
        out_channels,
    ];
    let total: usize = counts.iter().sum();
    if total == 0 || total > (1 << 28) {
        return Err(parse(8, format!("unreasonable weight count {total}")));
    }
    let need = 24 + total * 4;
    if bytes.len() < need {
        return Err(parse(
            24,
            format!("need {need} bytes, found {}", bytes.len()),
        ));
    }
    let mut floats = Vec::with_capacity(total);
    for i in 0..total {
        let o = 24 + i * 4;
        floats.push(f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64);
    }
    let fuse_start = counts[0];
    let bias_start = counts[0] + counts[1];
    let w = PpaWeights {
        reduce_kernel: floats[..fuse_start].to_vec(),
        mask_channels,
        reduced_channels,
        fuse_kernel: floats[fuse_start..bias_start].to_vec(),
        fuse_in_channels,
        out_channels,
        fuse_bias: floats[bias_start..].to_vec(),
    };
    w.validate().map_err(|e| IoError::Validation {
        path: path.to_path_buf(),
        field: "weights".into(),
        message: e.to_string(),
    })?;
    Ok(w)
}
