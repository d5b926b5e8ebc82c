//! Aggregated metric reports with text / JSON / delimited emitters.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{DbeMetrics, DdeMetrics, DepthMetrics, PeMetrics, SegMetrics};

/// Dataset-level iBims metric family means.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IbimsMetrics {
    /// Planarity error, centimeters.
    pub pe_plan: f64,
    /// Orientation error, degrees.
    pub pe_orie: f64,
    /// Boundary accuracy, pixels.
    pub dbe_acc: f64,
    /// Boundary completeness, pixels.
    pub dbe_comp: f64,
    /// Percentages; they partition the jointly valid pixels.
    pub dde_0: f64,
    pub dde_minus: f64,
    pub dde_plus: f64,
}

impl IbimsMetrics {
    /// Aggregates per-image results: PE and DBE average over the images
    /// where they exist, DDE over all of them. `None` when nothing is
    /// present at all.
    pub fn aggregate(
        pe: &[PeMetrics],
        dbe: &[DbeMetrics],
        dde: &[DdeMetrics],
    ) -> Option<IbimsMetrics> {
        if pe.is_empty() && dbe.is_empty() && dde.is_empty() {
            return None;
        }
        let mean = |xs: &[f64]| -> f64 {
            if xs.is_empty() {
                f64::NAN
            } else {
                xs.iter().sum::<f64>() / xs.len() as f64
            }
        };
        Some(IbimsMetrics {
            pe_plan: mean(&pe.iter().map(|m| m.pe_plan).collect::<Vec<_>>()),
            pe_orie: mean(&pe.iter().map(|m| m.pe_orie).collect::<Vec<_>>()),
            dbe_acc: mean(&dbe.iter().map(|m| m.dbe_acc).collect::<Vec<_>>()),
            dbe_comp: mean(&dbe.iter().map(|m| m.dbe_comp).collect::<Vec<_>>()),
            dde_0: mean(&dde.iter().map(|m| m.dde_0).collect::<Vec<_>>()),
            dde_minus: mean(&dde.iter().map(|m| m.dde_minus).collect::<Vec<_>>()),
            dde_plus: mean(&dde.iter().map(|m| m.dde_plus).collect::<Vec<_>>()),
        })
    }
}

/// Aggregated metrics for a dataset run. Sections are present only when
/// the corresponding evaluation actually ran.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub images: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<DepthMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seg: Option<SegMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ibims: Option<IbimsMetrics>,
    /// Free-form bookkeeping (skipped regions, absent metrics, ...).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl MetricsReport {
    /// Flat `key = value` table, one metric per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "images = {}", self.images);
        if let Some(d) = &self.depth {
            let _ = writeln!(out, "rel = {}", d.rel);
            let _ = writeln!(out, "log10 = {}", d.log10);
            let _ = writeln!(out, "rms = {}", d.rms);
            let _ = writeln!(out, "sigma1 = {}", d.sigma1);
            let _ = writeln!(out, "sigma2 = {}", d.sigma2);
            let _ = writeln!(out, "sigma3 = {}", d.sigma3);
        }
        if let Some(s) = &self.seg {
            let _ = writeln!(out, "ap_mask = {}", s.ap_mask);
            let _ = writeln!(out, "ap_mask50 = {}", s.ap_mask50);
            let _ = writeln!(out, "ap_mask75 = {}", s.ap_mask75);
            let _ = writeln!(out, "ap_box = {}", s.ap_box);
            let _ = writeln!(out, "ap_box50 = {}", s.ap_box50);
            let _ = writeln!(out, "ap_box75 = {}", s.ap_box75);
        }
        if let Some(i) = &self.ibims {
            let _ = writeln!(out, "pe_plan_cm = {}", i.pe_plan);
            let _ = writeln!(out, "pe_orie_deg = {}", i.pe_orie);
            let _ = writeln!(out, "dbe_acc_px = {}", i.dbe_acc);
            let _ = writeln!(out, "dbe_comp_px = {}", i.dbe_comp);
            let _ = writeln!(out, "dde_0_pct = {}", i.dde_0);
            let _ = writeln!(out, "dde_minus_pct = {}", i.dde_minus);
            let _ = writeln!(out, "dde_plus_pct = {}", i.dde_plus);
        }
        for note in &self.notes {
            let _ = writeln!(out, "# {note}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}
