//! Standard monocular depth metrics.

use serde::{Deserialize, Serialize};

use crate::grid::{DepthMap, GridError};

use super::MetricError;

/// rel / log10 / RMS errors and the three threshold accuracies, computed
/// over jointly valid pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    /// Mean |p - g| / g.
    pub rel: f64,
    /// Mean |log10 p - log10 g|.
    pub log10: f64,
    /// sqrt(mean (p - g)^2), meters.
    pub rms: f64,
    /// Fraction with max(p/g, g/p) < 1.25.
    pub sigma1: f64,
    /// Fraction with max(p/g, g/p) < 1.25^2.
    pub sigma2: f64,
    /// Fraction with max(p/g, g/p) < 1.25^3.
    pub sigma3: f64,
}

impl DepthMetrics {
    /// Unweighted mean over per-image metrics; `None` for an empty slice.
    pub fn mean(items: &[DepthMetrics]) -> Option<DepthMetrics> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        Some(DepthMetrics {
            rel: items.iter().map(|m| m.rel).sum::<f64>() / n,
            log10: items.iter().map(|m| m.log10).sum::<f64>() / n,
            rms: items.iter().map(|m| m.rms).sum::<f64>() / n,
            sigma1: items.iter().map(|m| m.sigma1).sum::<f64>() / n,
            sigma2: items.iter().map(|m| m.sigma2).sum::<f64>() / n,
            sigma3: items.iter().map(|m| m.sigma3).sum::<f64>() / n,
        })
    }
}

/// Computes the six standard metrics for one image.
pub fn depth_metrics(pred: &DepthMap, gt: &DepthMap) -> Result<DepthMetrics, MetricError> {
    pred.values.check_same_size(&gt.values)?;
    let mut count = 0usize;
    let mut rel_sum = 0.0;
    let mut log_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut s = [0usize; 3];
    let bounds = [1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25];
    for i in 0..pred.values.len() {
        if !(pred.valid.data()[i] && gt.valid.data()[i]) {
            continue;
        }
        let p = pred.values.data()[i];
        let g = gt.values.data()[i];
        count += 1;
        rel_sum += (p - g).abs() / g;
        log_sum += (p.log10() - g.log10()).abs();
        sq_sum += (p - g) * (p - g);
        let ratio = (p / g).max(g / p);
        for (k, b) in bounds.iter().enumerate() {
            if ratio < *b {
                s[k] += 1;
            }
        }
    }
    if count == 0 {
        return Err(GridError::NoValidPixels.into());
    }
    let n = count as f64;
    Ok(DepthMetrics {
        rel: rel_sum / n,
        log10: log_sum / n,
        rms: (sq_sum / n).sqrt(),
        sigma1: s[0] as f64 / n,
        sigma2: s[1] as f64 / n,
        sigma3: s[2] as f64 / n,
    })
}
