//! Point clouds backprojected from depth maps.

use std::io::Write;

use nalgebra::Vector3;
use thiserror::Error;

use crate::camera::CameraIntrinsics;
use crate::grid::{DepthMap, Grid, GridError};
use crate::par::map_indexed;

#[derive(Debug, Error)]
pub enum CloudError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("ply write failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Camera-frame point cloud with per-point source pixel and group label.
///
/// Group 0 is the non-planar remainder; planar instances are labeled 1..N.
#[derive(Clone, Debug, Default)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub pixel_of: Vec<(u32, u32)>,
    pub group_of: Vec<u32>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of every point carrying the given group label.
    pub fn indices_of_group(&self, label: u32) -> Vec<usize> {
        self.group_of
            .iter()
            .enumerate()
            .filter(|(_, &g)| g == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// Sorted list of distinct group labels present in the cloud.
    pub fn group_labels(&self) -> Vec<u32> {
        let mut labels: Vec<u32> = self.group_of.clone();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    /// Writes the cloud as ASCII PLY, with a per-point integer `group`
    /// property when `with_groups` is set.
    pub fn write_ply<W: Write>(&self, mut w: W, with_groups: bool) -> Result<(), CloudError> {
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        writeln!(w, "element vertex {}", self.len())?;
        writeln!(w, "property double x")?;
        writeln!(w, "property double y")?;
        writeln!(w, "property double z")?;
        if with_groups {
            writeln!(w, "property int group")?;
        }
        writeln!(w, "end_header")?;
        for (i, p) in self.points.iter().enumerate() {
            if with_groups {
                writeln!(w, "{} {} {} {}", p.x, p.y, p.z, self.group_of[i])?;
            } else {
                writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
            }
        }
        Ok(())
    }
}

/// Lifts every valid depth pixel into the camera frame.
///
/// Points appear in row-major pixel order. Group labels come from `seg`
/// (instance-id grid, 0 = non-planar) or default to 0.
pub fn backproject(
    depth: &DepthMap,
    cam: &CameraIntrinsics,
    seg: Option<&Grid<u32>>,
) -> Result<PointCloud, CloudError> {
    let (w, h) = (depth.width(), depth.height());
    if w != cam.width || h != cam.height {
        return Err(GridError::DimensionMismatch {
            expected_w: cam.width,
            expected_h: cam.height,
            got_w: w,
            got_h: h,
        }
        .into());
    }
    if let Some(seg) = seg {
        depth.values.check_same_size(seg)?;
    }

    let rows = map_indexed(h, |y| {
        let mut pts = Vec::new();
        let mut pix = Vec::new();
        let mut grp = Vec::new();
        for x in 0..w {
            if let Some(z) = depth.depth_at(x, y) {
                pts.push(cam.unproject(x as f64, y as f64, z));
                pix.push((x as u32, y as u32));
                grp.push(seg.map_or(0, |s| s.at(x, y)));
            }
        }
        (pts, pix, grp)
    });

    let mut cloud = PointCloud::default();
    for (pts, pix, grp) in rows {
        cloud.points.extend(pts);
        cloud.pixel_of.extend(pix);
        cloud.group_of.extend(grp);
    }
    Ok(cloud)
}
