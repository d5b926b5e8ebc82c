//! `eval-depth`, `eval-seg`, `eval-ibims`: metric reports over a manifest.
//!
//! Per-image metrics are computed in parallel but aggregated in manifest
//! order with sequential folds, so every report is byte-identical for any
//! `--jobs` value.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use clap::Args;

use planarkit::masks::InstanceMaskSet;
use planarkit::metrics::{
    depth_edges, depth_metrics, ibims_dbe, ibims_dde, ibims_pe, seg_metrics, ApSample,
    DepthMetrics, IbimsMetrics, MetricsReport,
};

use crate::dataset::{for_each_sample, load_samples};
use crate::Common;

#[derive(Args)]
pub struct EvalDepthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    manifest: std::path::PathBuf,
    /// Also write per-image rows as a delimited file.
    #[arg(long, default_value_t = false)]
    per_image: bool,
}

#[derive(Args)]
pub struct EvalSegArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    manifest: std::path::PathBuf,
}

#[derive(Args)]
pub struct EvalIbimsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    manifest: std::path::PathBuf,
    /// Also write per-image rows as a delimited file.
    #[arg(long, default_value_t = false)]
    per_image: bool,
}

fn emit(out: &Path, stem: &str, report: &MetricsReport) -> Result<()> {
    let text = report.to_text();
    print!("{text}");
    super::write_text(&out.join(format!("{stem}.txt")), &text)?;
    super::write_text(&out.join(format!("{stem}.json")), &report.to_json())?;
    Ok(())
}

pub fn run_depth(args: EvalDepthArgs) -> Result<()> {
    super::ensure_out_dir(&args.common.out)?;
    let samples = load_samples(&args.manifest)?;
    let per_image = for_each_sample(&samples, args.common.jobs, |_, sample| {
        let pred = sample.pred_depth()?;
        let gt = sample.gt_depth()?;
        depth_metrics(&pred, &gt).with_context(|| format!("sample {}", sample.entry.id))
    })?;

    let report = MetricsReport {
        images: samples.len(),
        depth: DepthMetrics::mean(&per_image),
        ..Default::default()
    };
    emit(&args.common.out, "eval_depth", &report)?;

    if args.per_image {
        let mut csv = String::from("id,rel,log10,rms,sigma1,sigma2,sigma3\n");
        for (sample, m) in samples.iter().zip(&per_image) {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                sample.entry.id, m.rel, m.log10, m.rms, m.sigma1, m.sigma2, m.sigma3
            );
        }
        super::write_text(&args.common.out.join("eval_depth_per_image.csv"), &csv)?;
    }
    Ok(())
}

pub fn run_seg(args: EvalSegArgs) -> Result<()> {
    super::ensure_out_dir(&args.common.out)?;
    let samples = load_samples(&args.manifest)?;
    let ap_samples = for_each_sample(&samples, args.common.jobs, |_, sample| {
        let predictions = sample.pred_masks()?;
        let gt_seg = sample.gt_seg()?;
        let gt_set = InstanceMaskSet::from_instance_ids(&gt_seg, None);
        let gt_masks = (0..gt_set.len()).map(|i| gt_set.binary_mask(i, 0.5)).collect();
        Ok(ApSample {
            predictions,
            gt_masks,
        })
    })?;

    let seg = seg_metrics(&ap_samples);
    let num_gt: usize = ap_samples.iter().map(|s| s.gt_masks.len()).sum();
    let mut report = MetricsReport {
        images: samples.len(),
        seg: Some(seg),
        ..Default::default()
    };
    if num_gt == 0 {
        report
            .notes
            .push("no ground-truth instances: AP undefined (NaN)".into());
    }
    emit(&args.common.out, "eval_seg", &report)
}

struct IbimsRow {
    pe: Option<planarkit::metrics::PeMetrics>,
    dbe: Option<planarkit::metrics::DbeMetrics>,
    dde: planarkit::metrics::DdeMetrics,
}

pub fn run_ibims(args: EvalIbimsArgs) -> Result<()> {
    let cfg = super::load_config(args.common.config.as_deref())?;
    super::ensure_out_dir(&args.common.out)?;
    let samples = load_samples(&args.manifest)?;
    let dbe_params = cfg.dbe_params();

    let rows = for_each_sample(&samples, args.common.jobs, |_, sample| {
        let pred = sample.pred_depth()?;
        let gt = sample.gt_depth()?;
        let cam = sample.intrinsics()?;
        let meta = sample.meta()?;
        let gt_seg = sample.gt_seg()?;

        let pe = ibims_pe(&pred, &gt_seg, &meta.planes, &cam).ok();
        let gt_edges = depth_edges(&gt, dbe_params.edge_threshold)?;
        let dbe = ibims_dbe(&pred, &gt_edges, &dbe_params)?;
        let dde = ibims_dde(&pred, &gt, cfg.dde_plane_distance)
            .with_context(|| format!("sample {}", sample.entry.id))?;
        Ok(IbimsRow { pe, dbe, dde })
    })?;

    let pe: Vec<_> = rows.iter().filter_map(|r| r.pe).collect();
    let dbe: Vec<_> = rows.iter().filter_map(|r| r.dbe).collect();
    let dde: Vec<_> = rows.iter().map(|r| r.dde).collect();
    let mut report = MetricsReport {
        images: samples.len(),
        ibims: IbimsMetrics::aggregate(&pe, &dbe, &dde),
        ..Default::default()
    };
    if pe.len() < samples.len() {
        report
            .notes
            .push(format!("planarity absent on {} images", samples.len() - pe.len()));
    }
    if dbe.len() < samples.len() {
        report.notes.push(format!(
            "boundary metric absent on {} images (no ground-truth edges)",
            samples.len() - dbe.len()
        ));
    }
    let skipped: usize = pe.iter().map(|p| p.regions_skipped).sum();
    if skipped > 0 {
        report
            .notes
            .push(format!("{skipped} planar regions skipped"));
    }
    emit(&args.common.out, "eval_ibims", &report)?;

    if args.per_image {
        let mut csv =
            String::from("id,pe_plan,pe_orie,dbe_acc,dbe_comp,dde_0,dde_minus,dde_plus\n");
        for (sample, row) in samples.iter().zip(&rows) {
            let fmt = |v: Option<f64>| v.map_or(String::from(""), |v| v.to_string());
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                sample.entry.id,
                fmt(row.pe.map(|p| p.pe_plan)),
                fmt(row.pe.map(|p| p.pe_orie)),
                fmt(row.dbe.map(|d| d.dbe_acc)),
                fmt(row.dbe.map(|d| d.dbe_comp)),
                row.dde.dde_0,
                row.dde.dde_minus,
                row.dde.dde_plus
            );
        }
        super::write_text(&args.common.out.join("eval_ibims_per_image.csv"), &csv)?;
    }
    Ok(())
}
