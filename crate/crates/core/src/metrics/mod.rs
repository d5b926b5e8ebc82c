//! Evaluation metric suite: standard depth metrics, class-agnostic COCO
//! average precision for masks and boxes, and the iBims PE / DBE / DDE
//! families, plus the aggregated report container.

mod ap;
mod depth;
mod edt;
mod ibims;
mod report;

pub use ap::{
    average_precision, average_precision_at, seg_metrics, ApResult, ApSample, IouMode, SegMetrics,
    COCO_THRESHOLDS,
};
pub use depth::{depth_metrics, DepthMetrics};
pub use edt::distance_transform;
pub use ibims::{
    depth_edges, ibims_dbe, ibims_dde, ibims_pe, DbeMetrics, DbeParams, DdeMetrics, PeMetrics,
};
pub use report::{IbimsMetrics, MetricsReport};

use thiserror::Error;

use crate::grid::GridError;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("no ground-truth plane for region {region}")]
    MissingPlane { region: u32 },
    #[error("no region contributed to the planarity metric")]
    NoRegions,
}
