//! `fit-planes`: per-instance plane parameters over a manifest.

use anyhow::{Context, Result};
use clap::Args;
use serde_json::json;

use planarkit::cloud::backproject;
use planarkit::derive_seed;
use planarkit::plane::{fit_plane_pca, fit_plane_ransac, Plane3D};

use crate::dataset::{for_each_sample, load_samples};
use crate::Common;

#[derive(Args)]
pub struct FitPlanesArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    manifest: std::path::PathBuf,
}

pub fn run(args: FitPlanesArgs) -> Result<()> {
    let cfg = super::load_config(args.common.config.as_deref())?;
    super::ensure_out_dir(&args.common.out)?;
    let samples = load_samples(&args.manifest)?;
    let use_ransac = cfg.render_fit == "ransac";

    let reports = for_each_sample(&samples, args.common.jobs, |index, sample| {
        let depth = sample.pred_depth()?;
        let cam = sample.intrinsics()?;
        let seg = sample.pred_seg()?;
        let cloud = backproject(&depth, &cam, Some(&seg))
            .with_context(|| format!("sample {}", sample.entry.id))?;
        let max_id = seg.data().iter().copied().max().unwrap_or(0);

        let mut rows = Vec::new();
        for id in 1..=max_id {
            let pts: Vec<_> = cloud
                .group_of
                .iter()
                .enumerate()
                .filter(|(_, &g)| g == id)
                .map(|(i, _)| cloud.points[i])
                .collect();
            let fitted: Option<Plane3D> = if pts.len() < 3 {
                None
            } else if use_ransac {
                let thr = cfg.ransac_threshold.unwrap_or_else(|| {
                    let mut depths: Vec<f64> = pts.iter().map(|p| p.z).collect();
                    depths.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    (0.01_f64).max(0.01 * depths[depths.len() / 2])
                });
                fit_plane_ransac(
                    &pts,
                    thr,
                    cfg.ransac_iterations,
                    derive_seed(args.common.seed, (index as u64) << 16 | id as u64),
                )
                .ok()
            } else {
                fit_plane_pca(&pts).ok()
            };
            rows.push(match fitted {
                Some(p) => json!({
                    "instance": id,
                    "normal": p.normal,
                    "offset": p.offset,
                    "inliers": p.inlier_count,
                    "rms_residual": p.rms_residual,
                }),
                None => json!({ "instance": id, "skipped": true }),
            });
        }
        Ok((sample.entry.id.clone(), rows))
    })?;

    let mut summary = String::new();
    for (id, rows) in &reports {
        let fitted = rows.iter().filter(|r| r.get("skipped").is_none()).count();
        summary.push_str(&format!(
            "{id}: {fitted} fitted, {} skipped\n",
            rows.len() - fitted
        ));
        let json = serde_json::to_string_pretty(&json!({ "id": id, "planes": rows }))?;
        super::write_text(&args.common.out.join(format!("planes_{id}.json")), &json)?;
    }
    print!("{summary}");
    super::write_text(&args.common.out.join("fit_planes.txt"), &summary)?;
    Ok(())
}
