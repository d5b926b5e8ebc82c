//! Normalized depth-gradient maps and the depth-gradient segmentation loss.
//!
//! The gradient map highlights occlusion boundaries: Sobel responses on the
//! ground-truth depth, squared, summed and normalized by squared depth so
//! that far surfaces do not dominate. The segmentation loss charges each
//! mask candidate for the gradient mass it covers, which pushes predicted
//! masks away from depth discontinuities.

use thiserror::Error;

use crate::grid::{DepthMap, Grid, GridError};
use crate::masks::{InstanceMaskSet, MaskError};
use crate::par::map_indexed;

#[derive(Debug, Error, PartialEq)]
pub enum GradientError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

/// Sobel responses in x and y with the joint stencil validity mask.
#[derive(Clone, Debug)]
pub struct SobelGradients {
    pub gx: Grid<f64>,
    pub gy: Grid<f64>,
    /// True where every pixel of the 3x3 stencil (replicate-padded) is valid.
    pub valid: Grid<bool>,
}

/// Depth-normalized gradient magnitude map.
#[derive(Clone, Debug)]
pub struct GradientMap {
    /// `(gx^2 + gy^2) / depth^2` on valid pixels, 0 elsewhere.
    pub values: Grid<f64>,
    pub valid: Grid<bool>,
}

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];

/// 3x3 Sobel responses with replicate border padding.
///
/// `gx` uses the kernel `[[-1,0,1],[-2,0,2],[-1,0,1]]` (correlation, so a
/// depth increase to the right is positive); `gy` uses its transpose. An
/// output pixel is invalid when any stencil sample is invalid.
pub fn sobel_gradients(depth: &DepthMap) -> Result<SobelGradients, GradientError> {
    let (w, h) = (depth.width(), depth.height());
    if w < 3 || h < 3 {
        return Err(GridError::TooSmall {
            width: w,
            height: h,
            min: 3,
        }
        .into());
    }

    let rows = map_indexed(h, |y| {
        let mut gx_row = vec![0.0; w];
        let mut gy_row = vec![0.0; w];
        let mut ok_row = vec![false; w];
        for x in 0..w {
            let mut gx = 0.0;
            let mut gy = 0.0;
            let mut ok = true;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    if !depth.valid.at(sx, sy) {
                        ok = false;
                    }
                    let v = depth.values.at(sx, sy);
                    gx += SOBEL_X[(dy + 1) as usize][(dx + 1) as usize] * v;
                    gy += SOBEL_X[(dx + 1) as usize][(dy + 1) as usize] * v;
                }
            }
            if ok {
                gx_row[x] = gx;
                gy_row[x] = gy;
                ok_row[x] = true;
            }
        }
        (gx_row, gy_row, ok_row)
    });

    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for (gx_row, gy_row, ok_row) in rows {
        gx.extend(gx_row);
        gy.extend(gy_row);
        valid.extend(ok_row);
    }
    Ok(SobelGradients {
        gx: Grid::from_vec(w, h, gx),
        gy: Grid::from_vec(w, h, gy),
        valid: Grid::from_vec(w, h, valid),
    })
}

/// Depth-normalized gradient map `(gx^2 + gy^2) / depth^2`.
pub fn gradient_map(depth: &DepthMap) -> Result<GradientMap, GradientError> {
    let sobel = sobel_gradients(depth)?;
    let (w, h) = (depth.width(), depth.height());
    let values = Grid::from_fn(w, h, |x, y| {
        if sobel.valid.at(x, y) {
            let gx = sobel.gx.at(x, y);
            let gy = sobel.gy.at(x, y);
            let d = depth.values.at(x, y);
            (gx * gx + gy * gy) / (d * d)
        } else {
            0.0
        }
    });
    Ok(GradientMap {
        values,
        valid: sobel.valid,
    })
}

fn check_masks(gradient: &GradientMap, masks: &InstanceMaskSet) -> Result<(), GradientError> {
    masks.validate(gradient.values.width(), gradient.values.height())?;
    Ok(())
}

/// Depth-gradient segmentation loss for one image:
/// mean over mask candidates of the valid-pixel mean of `G ⊙ P_j`.
///
/// Returns 0 for an empty stack (and for a map without valid pixels);
/// batch aggregation over images is the caller's mean.
pub fn dgs_loss(gradient: &GradientMap, masks: &InstanceMaskSet) -> Result<f64, GradientError> {
    check_masks(gradient, masks)?;
    let m = masks.len();
    let valid_count = gradient.valid.data().iter().filter(|&&v| v).count();
    if m == 0 || valid_count == 0 {
        return Ok(0.0);
    }

    let per_mask = map_indexed(m, |j| {
        let mask = &masks.masks[j];
        let mut sum = 0.0;
        for i in 0..gradient.values.len() {
            if gradient.valid.data()[i] {
                sum += gradient.values.data()[i] * mask.data()[i];
            }
        }
        sum / valid_count as f64
    });
    Ok(per_mask.iter().sum::<f64>() / m as f64)
}

/// Analytic gradient of [`dgs_loss`] with respect to every mask entry:
/// `G / (M * #valid)` on valid pixels, 0 elsewhere — identical for every
/// candidate slice since the loss is linear in the stack.
pub fn dgs_loss_grad(
    gradient: &GradientMap,
    masks: &InstanceMaskSet,
) -> Result<Vec<Grid<f64>>, GradientError> {
    check_masks(gradient, masks)?;
    let m = masks.len();
    let valid_count = gradient.valid.data().iter().filter(|&&v| v).count();
    let (w, h) = (gradient.values.width(), gradient.values.height());
    if m == 0 {
        return Ok(Vec::new());
    }
    if valid_count == 0 {
        return Ok(vec![Grid::new(w, h, 0.0); m]);
    }
    let scale = 1.0 / (m as f64 * valid_count as f64);
    let slice = Grid::from_fn(w, h, |x, y| {
        if gradient.valid.at(x, y) {
            gradient.values.at(x, y) * scale
        } else {
            0.0
        }
    });
    Ok(vec![slice; m])
}
