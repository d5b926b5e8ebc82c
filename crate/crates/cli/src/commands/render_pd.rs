//! `render-pd`: replace per-instance depth with fitted-plane renderings and
//! emit an updated manifest.

use std::path::Path;

use anyhow::{bail, Result};
use clap::Args;

use planarkit::derive_seed;
use planarkit::io::{write_depth, write_manifest, ManifestEntry};
use planarkit::render_planar_depth;

use crate::dataset::{for_each_sample, load_samples};
use crate::Common;

#[derive(Args)]
pub struct RenderPdArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    manifest: std::path::PathBuf,
    /// Output depth format: d64 (lossless), pfm or png.
    #[arg(long, default_value = "d64")]
    depth_format: String,
}

/// Re-targets a manifest-relative path so it resolves from `out`.
fn retarget(dir: &Path, out: &Path, rel: &str) -> String {
    let absolute = dir.join(rel);
    if absolute.parent() == Some(out) {
        rel.to_string()
    } else {
        absolute.to_string_lossy().into_owned()
    }
}

pub fn run(args: RenderPdArgs) -> Result<()> {
    if !["png", "pfm", "d64"].contains(&args.depth_format.as_str()) {
        bail!("unsupported --depth-format `{}`", args.depth_format);
    }
    let cfg = super::load_config(args.common.config.as_deref())?;
    super::ensure_out_dir(&args.common.out)?;
    // Cross-references to unchanged files are written as absolute paths,
    // so resolve both trees first.
    let out = args
        .common
        .out
        .canonicalize()
        .with_context(|| format!("resolving {}", args.common.out.display()))?;
    let manifest = args
        .manifest
        .canonicalize()
        .with_context(|| format!("resolving {}", args.manifest.display()))?;
    let samples = load_samples(&manifest)?;

    let results = for_each_sample(&samples, args.common.jobs, |index, sample| {
        let depth = sample.pred_depth()?;
        let cam = sample.intrinsics()?;
        let masks = sample.pred_masks()?;
        let fit = cfg.fit_method(derive_seed(args.common.seed, index as u64));
        let rendered = render_planar_depth(&depth, &masks, &cam, fit)?;

        let depth_file = format!("depth_{}.{}", sample.entry.id, args.depth_format);
        write_depth(&out.join(&depth_file), &rendered.depth)?;

        let entry = ManifestEntry {
            id: sample.entry.id.clone(),
            depth_path: depth_file,
            gt_depth_path: retarget(&sample.dir, &out, &sample.entry.gt_depth_path),
            seg_path: retarget(&sample.dir, &out, &sample.entry.seg_path),
            meta_path: retarget(&sample.dir, &out, &sample.entry.meta_path),
            intrinsics_path: retarget(&sample.dir, &out, &sample.entry.intrinsics_path),
        };
        Ok((entry, rendered.skipped))
    })?;

    let mut entries = Vec::with_capacity(results.len());
    let mut report = String::new();
    for (entry, skipped) in results {
        if skipped.is_empty() {
            report.push_str(&format!("{}: all instances rendered\n", entry.id));
        } else {
            report.push_str(&format!(
                "{}: skipped instances {:?} (fewer than 3 valid pixels or degenerate)\n",
                entry.id,
                skipped.iter().map(|m| m + 1).collect::<Vec<_>>()
            ));
        }
        entries.push(entry);
    }

    // The meta record's gt_seg_path is read relative to the new manifest
    // directory, so rewrite metas whose segmentation stayed behind.
    for entry in &mut entries {
        let meta_path = Path::new(&entry.meta_path);
        let resolved = out.join(meta_path);
        let meta = planarkit::io::read_scene_meta(&resolved)?;
        let gt_seg_abs = resolved
            .parent()
            .unwrap_or(Path::new("."))
            .join(&meta.gt_seg_path);
        if !out.join(&meta.gt_seg_path).exists() {
            let mut rewritten = meta;
            rewritten.gt_seg_path = gt_seg_abs.to_string_lossy().into_owned();
            let new_meta = format!("meta_{}.json", entry.id);
            planarkit::io::write_scene_meta(&out.join(&new_meta), &rewritten)?;
            entry.meta_path = new_meta;
        }
    }

    write_manifest(&out.join("manifest.jsonl"), &entries)?;
    print!("{report}");
    super::write_text(&out.join("render_report.txt"), &report)?;
    println!("rendered manifest: {}", out.join("manifest.jsonl").display());
    Ok(())
}
