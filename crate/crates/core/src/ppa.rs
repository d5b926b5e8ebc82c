//! Reference forward pass of the plane-prior attention fusion block.
//!
//! The block turns a stack of plane mask candidates into an attention signal
//! for depth features: a 1x1 convolution shrinks the M mask channels to C'
//! attention channels, bilinear resize brings them to feature resolution,
//! the attention multiplies the features group-wise (C' broadcast over C,
//! requiring C' | C), the product is concatenated with the original features
//! and a 3x3 convolution with bias and rectification fuses the result.
//! Pure f64 arithmetic with fixed conventions (half-pixel-center resize,
//! replicate padding), so outputs are bit-reproducible.

use thiserror::Error;

use crate::grid::Grid;
use crate::masks::InstanceMaskSet;
use crate::par::map_indexed;

#[derive(Debug, Error, PartialEq)]
pub enum PpaError {
    #[error("mask stack is empty")]
    NoMasks,
    #[error("mask stack has {got} channels, weights expect {expected}")]
    MaskChannelMismatch { got: usize, expected: usize },
    #[error("reduced channels {reduced} do not divide feature channels {feats}")]
    GroupMismatch { reduced: usize, feats: usize },
    #[error("fuse kernel expects {expected} input channels, concatenation has {got}")]
    FuseInputMismatch { expected: usize, got: usize },
    #[error("weights container is inconsistent: {0}")]
    BadWeights(String),
    #[error("masks must share one resolution: mask {index} is {got_w}x{got_h}, expected {w}x{h}")]
    MaskSizeMismatch {
        index: usize,
        w: usize,
        h: usize,
        got_w: usize,
        got_h: usize,
    },
}

/// C×H×W feature stack, channel-major (`idx = (c*H + y)*W + x`).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGrid {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureGrid {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn at(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// Replicate-padded sample.
    #[inline]
    pub fn at_clamped(&self, c: usize, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.at(c, xc, yc)
    }
}

/// Weights of the fusion block.
#[derive(Clone, Debug, PartialEq)]
pub struct PpaWeights {
    /// 1x1 reduction, row-major `[c_reduced][mask_channel]`.
    pub reduce_kernel: Vec<f64>,
    pub mask_channels: usize,
    pub reduced_channels: usize,
    /// 3x3 fusion, `[c_out][c_in][ky][kx]` with `c_in = 2 * feat_channels`.
    pub fuse_kernel: Vec<f64>,
    pub fuse_in_channels: usize,
    pub out_channels: usize,
    pub fuse_bias: Vec<f64>,
}

impl PpaWeights {
    pub fn validate(&self) -> Result<(), PpaError> {
        if self.reduce_kernel.len() != self.reduced_channels * self.mask_channels {
            return Err(PpaError::BadWeights(format!(
                "reduce kernel has {} entries, expected {}",
                self.reduce_kernel.len(),
                self.reduced_channels * self.mask_channels
            )));
        }
        if self.fuse_kernel.len() != self.out_channels * self.fuse_in_channels * 9 {
            return Err(PpaError::BadWeights(format!(
                "fuse kernel has {} entries, expected {}",
                self.fuse_kernel.len(),
                self.out_channels * self.fuse_in_channels * 9
            )));
        }
        if self.fuse_bias.len() != self.out_channels {
            return Err(PpaError::BadWeights(format!(
                "bias has {} entries, expected {}",
                self.fuse_bias.len(),
                self.out_channels
            )));
        }
        let finite = self
            .reduce_kernel
            .iter()
            .chain(&self.fuse_kernel)
            .chain(&self.fuse_bias)
            .all(|v| v.is_finite());
        if !finite {
            return Err(PpaError::BadWeights("non-finite weight entry".into()));
        }
        Ok(())
    }

    #[inline]
    fn fuse_at(&self, co: usize, ci: usize, ky: usize, kx: usize) -> f64 {
        self.fuse_kernel[((co * self.fuse_in_channels + ci) * 3 + ky) * 3 + kx]
    }
}

/// Bilinear sample of `grid` at continuous source coordinates, edge-clamped.
fn bilinear(grid: &Grid<f64>, sx: f64, sy: f64) -> f64 {
    let x0 = sx.floor();
    let y0 = sy.floor();
    let wx = sx - x0;
    let wy = sy - y0;
    let p = |dx: isize, dy: isize| grid.at_clamped(x0 as isize + dx, y0 as isize + dy);
    (1.0 - wy) * ((1.0 - wx) * p(0, 0) + wx * p(1, 0)) + wy * ((1.0 - wx) * p(0, 1) + wx * p(1, 1))
}

/// Forward pass of the fusion block: reduce, resize, multiply, concatenate,
/// fuse, rectify. Output shape is always `out_channels × H × W` of the
/// feature grid.
pub fn ppa_forward(
    masks: &InstanceMaskSet,
    feats: &FeatureGrid,
    w: &PpaWeights,
) -> Result<FeatureGrid, PpaError> {
    w.validate()?;
    let m = masks.len();
    if m == 0 {
        return Err(PpaError::NoMasks);
    }
    if m != w.mask_channels {
        return Err(PpaError::MaskChannelMismatch {
            got: m,
            expected: w.mask_channels,
        });
    }
    let (mw, mh) = (masks.masks[0].width(), masks.masks[0].height());
    for (i, mask) in masks.masks.iter().enumerate() {
        if mask.width() != mw || mask.height() != mh {
            return Err(PpaError::MaskSizeMismatch {
                index: i,
                w: mw,
                h: mh,
                got_w: mask.width(),
                got_h: mask.height(),
            });
        }
    }
    let c = feats.channels;
    let cr = w.reduced_channels;
    if cr == 0 || c % cr != 0 {
        return Err(PpaError::GroupMismatch {
            reduced: cr,
            feats: c,
        });
    }
    if w.fuse_in_channels != 2 * c {
        return Err(PpaError::FuseInputMismatch {
            expected: w.fuse_in_channels,
            got: 2 * c,
        });
    }
    let (fw, fh) = (feats.width, feats.height);
    let group = c / cr;

    // 1x1 reduction at mask resolution.
    let reduced: Vec<Grid<f64>> = map_indexed(cr, |rc| {
        Grid::from_fn(mw, mh, |x, y| {
            let mut acc = 0.0;
            for (mc, mask) in masks.masks.iter().enumerate() {
                acc += w.reduce_kernel[rc * w.mask_channels + mc] * mask.at(x, y);
            }
            acc
        })
    });

    // Bilinear resize to feature resolution with half-pixel centers.
    let sx_scale = mw as f64 / fw as f64;
    let sy_scale = mh as f64 / fh as f64;
    let attention: Vec<Grid<f64>> = map_indexed(cr, |rc| {
        Grid::from_fn(fw, fh, |x, y| {
            let sx = (x as f64 + 0.5) * sx_scale - 0.5;
            let sy = (y as f64 + 0.5) * sy_scale - 0.5;
            bilinear(&reduced[rc], sx, sy)
        })
    });

    // Concatenated input: attention-weighted features then raw features.
    let mut fused_in = FeatureGrid::zeros(2 * c, fh, fw);
    for ch in 0..c {
        let att = &attention[ch / group];
        for y in 0..fh {
            for x in 0..fw {
                fused_in.set(ch, x, y, feats.at(ch, x, y) * att.at(x, y));
                fused_in.set(c + ch, x, y, feats.at(ch, x, y));
            }
        }
    }

    // 3x3 convolution, replicate padding, bias, rectification.
    let out_rows = map_indexed(w.out_channels * fh, |job| {
        let co = job / fh;
        let y = job % fh;
        let mut row = vec![0.0; fw];
        for (x, slot) in row.iter_mut().enumerate() {
            let mut acc = w.fuse_bias[co];
            for ci in 0..2 * c {
                for ky in 0..3 {
                    for kx in 0..3 {
                        let sx = x as isize + kx as isize - 1;
                        let sy = y as isize + ky as isize - 1;
                        acc += w.fuse_at(co, ci, ky, kx) * fused_in.at_clamped(ci, sx, sy);
                    }
                }
            }
            *slot = acc.max(0.0);
        }
        row
    });

    let mut out = FeatureGrid::zeros(w.out_channels, fh, fw);
    for (job, row) in out_rows.into_iter().enumerate() {
        let co = job / fh;
        let y = job % fh;
        for (x, v) in row.into_iter().enumerate() {
            out.set(co, x, y, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masks::BoundingBox;

    fn mask_stack(values: Vec<Grid<f64>>) -> InstanceMaskSet {
        let n = values.len();
        let (w, h) = (values[0].width(), values[0].height());
        InstanceMaskSet {
            masks: values,
            scores: vec![1.0; n],
            boxes: vec![
                BoundingBox {
                    x0: 0.0,
                    y0: 0.0,
                    x1: w as f64,
                    y1: h as f64
                };
                n
            ],
            labels: vec![0; n],
        }
    }

    /// Fuse kernel that copies the raw-feature half through a centered tap.
    fn passthrough_weights(c: usize) -> PpaWeights {
        let out_channels = c;
        let fuse_in = 2 * c;
        let mut fuse = vec![0.0; out_channels * fuse_in * 9];
        for co in 0..out_channels {
            let ci = c + co;
            fuse[((co * fuse_in + ci) * 3 + 1) * 3 + 1] = 1.0;
        }
        PpaWeights {
            reduce_kernel: vec![1.0],
            mask_channels: 1,
            reduced_channels: 1,
            fuse_kernel: fuse,
            fuse_in_channels: fuse_in,
            out_channels,
            fuse_bias: vec![0.0; out_channels],
        }
    }

    #[test]
    fn zero_masks_passthrough_selects_rectified_feats() {
        let c = 2;
        let feats = FeatureGrid::from_fn(c, 5, 7, |ch, x, y| {
            (ch as f64 + 1.0) * (x as f64 - 3.0) + y as f64
        });
        let masks = mask_stack(vec![Grid::new(4, 3, 0.0)]);
        let out = ppa_forward(&masks, &feats, &passthrough_weights(c)).unwrap();
        assert_eq!((out.channels, out.height, out.width), (c, 5, 7));
        for ch in 0..c {
            for y in 0..5 {
                for x in 0..7 {
                    assert_eq!(out.at(ch, x, y), feats.at(ch, x, y).max(0.0));
                }
            }
        }
    }

    #[test]
    fn unit_attention_reproduces_feats_in_product_half() {
        // All-one masks with a unit 1x1 kernel: the attended half of the
        // concatenation equals feats exactly. A fuse kernel selecting that
        // half must reproduce max(0, feats).
        let c = 3;
        let feats = FeatureGrid::from_fn(c, 4, 6, |ch, x, y| {
            0.5 * ch as f64 + 0.1 * x as f64 - 0.2 * y as f64 + 0.3
        });
        let masks = mask_stack(vec![Grid::new(6, 4, 1.0)]);
        let mut w = passthrough_weights(c);
        // Move the selector from the raw half to the product half.
        let fuse_in = 2 * c;
        w.fuse_kernel = vec![0.0; c * fuse_in * 9];
        for co in 0..c {
            w.fuse_kernel[((co * fuse_in + co) * 3 + 1) * 3 + 1] = 1.0;
        }
        let out = ppa_forward(&masks, &feats, &w).unwrap();
        for ch in 0..c {
            for y in 0..4 {
                for x in 0..6 {
                    assert!((out.at(ch, x, y) - feats.at(ch, x, y).max(0.0)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn group_mismatch_is_rejected() {
        let feats = FeatureGrid::zeros(3, 4, 4);
        let masks = mask_stack(vec![Grid::new(4, 4, 0.0), Grid::new(4, 4, 0.0)]);
        let w = PpaWeights {
            reduce_kernel: vec![0.0; 4],
            mask_channels: 2,
            reduced_channels: 2,
            fuse_kernel: vec![0.0; 1 * 6 * 9],
            fuse_in_channels: 6,
            out_channels: 1,
            fuse_bias: vec![0.0],
        };
        assert_eq!(
            ppa_forward(&masks, &feats, &w).unwrap_err(),
            PpaError::GroupMismatch {
                reduced: 2,
                feats: 3
            }
        );
    }

    #[test]
    fn output_nonnegative_with_negative_bias() {
        let feats = FeatureGrid::from_fn(2, 6, 6, |_, x, y| (x + y) as f64 * 0.1 - 0.4);
        let masks = mask_stack(vec![Grid::new(3, 3, 0.5)]);
        let mut w = passthrough_weights(2);
        w.fuse_bias = vec![-5.0, -5.0];
        let out = ppa_forward(&masks, &feats, &w).unwrap();
        assert!(out.data.iter().all(|&v| v >= 0.0));
    }
}
