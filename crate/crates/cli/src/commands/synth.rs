//! `synth`: emit a synthetic dataset (depth + segmentation + metadata +
//! manifest) from the analytic generator.

use anyhow::{bail, Context, Result};
use clap::Args;

use planarkit::derive_seed;
use planarkit::io::{
    write_depth, write_intrinsics, write_manifest, write_scene_meta, write_seg_png, write_sidecar,
    ManifestEntry, SceneMeta, SegSidecar,
};
use planarkit::masks::InstanceMaskSet;
use planarkit::synth::{generate_scene, SceneSpec};

use crate::Common;

#[derive(Args)]
pub struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Number of images to generate.
    #[arg(long, default_value_t = 20)]
    images: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 48)]
    height: usize,
    /// Extra tilted slabs per scene.
    #[arg(long, default_value_t = 2)]
    extra_planes: usize,
    /// Add one sphere (non-planar region) per scene.
    #[arg(long, default_value_t = false)]
    sphere: bool,
    /// Additive Gaussian depth noise, meters.
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    /// Room extents as `x,y,z` meters.
    #[arg(long, default_value = "4,3,5")]
    room: String,
    /// Horizontal field of view, degrees.
    #[arg(long, default_value_t = 60.0)]
    hfov: f64,
    /// Scale of the per-image camera pose jitter; 0 pins every camera to
    /// the room center looking straight ahead.
    #[arg(long, default_value_t = 1.0)]
    pose_jitter: f64,
    /// Depth file format for both roles: png, pfm or d64.
    #[arg(long, default_value = "png")]
    depth_format: String,
}

fn parse_room(text: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("room `{text}` is not `x,y,z`"))?;
    if parts.len() != 3 {
        bail!("room `{text}` must have exactly three components");
    }
    Ok([parts[0], parts[1], parts[2]])
}

pub fn run(args: SynthArgs) -> Result<()> {
    if !["png", "pfm", "d64"].contains(&args.depth_format.as_str()) {
        bail!("unsupported --depth-format `{}`", args.depth_format);
    }
    super::ensure_out_dir(&args.common.out)?;
    let room = parse_room(&args.room)?;
    let out = &args.common.out;

    let mut entries = Vec::with_capacity(args.images);
    let mut intrinsics_written = false;
    for i in 0..args.images {
        let image_seed = derive_seed(args.common.seed, i as u64);
        // Jitter the pose inside a safe margin so scenes differ per image.
        let jitter = |k: u64, lo: f64, hi: f64| {
            let u = (derive_seed(image_seed, k) >> 11) as f64 / (1u64 << 53) as f64;
            let mid = 0.5 * (lo + hi);
            mid + args.pose_jitter * (lo + u * (hi - lo) - mid)
        };
        let spec = SceneSpec {
            width: args.width,
            height: args.height,
            hfov_deg: args.hfov,
            room,
            cam_pos: [
                room[0] * jitter(1, 0.35, 0.65),
                room[1] * jitter(2, 0.35, 0.65),
                room[2] * jitter(3, 0.1, 0.3),
            ],
            yaw_deg: jitter(4, -12.0, 12.0),
            pitch_deg: jitter(5, -8.0, 8.0),
            extra_planes: args.extra_planes,
            sphere: args.sphere,
            noise_sigma: args.noise_sigma,
            rng_seed: image_seed,
            ..Default::default()
        };
        let scene = generate_scene(&spec).with_context(|| format!("generating image {i}"))?;

        if !intrinsics_written {
            write_intrinsics(&out.join("intrinsics.json"), &scene.cam)?;
            intrinsics_written = true;
        }

        let id = format!("{i:04}");
        let gt_depth_file = format!("gt_depth_{id}.{}", args.depth_format);
        let depth_file = format!("depth_{id}.{}", args.depth_format);
        let seg_file = format!("seg_{id}.png");
        let meta_file = format!("meta_{id}.json");

        write_depth(&out.join(&gt_depth_file), &scene.depth)?;
        // The prediction role starts as a copy of the ground truth; later
        // stages (render-pd, external predictors) replace it.
        write_depth(&out.join(&depth_file), &scene.depth)?;
        write_seg_png(&out.join(&seg_file), &scene.seg)?;
        let masks = InstanceMaskSet::from_instance_ids(&scene.seg, None);
        write_sidecar(
            &out.join(format!("{seg_file}.json")),
            &SegSidecar::from_mask_set(&masks),
        )?;
        write_scene_meta(
            &out.join(&meta_file),
            &SceneMeta {
                gt_seg_path: seg_file.clone(),
                planes: scene.planes.clone(),
                sphere: scene.sphere,
            },
        )?;

        entries.push(ManifestEntry {
            id,
            depth_path: depth_file,
            gt_depth_path: gt_depth_file,
            seg_path: seg_file,
            meta_path: meta_file,
            intrinsics_path: "intrinsics.json".into(),
        });
    }

    write_manifest(&out.join("manifest.jsonl"), &entries)?;
    println!(
        "wrote {} images to {} (manifest.jsonl)",
        entries.len(),
        out.display()
    );
    Ok(())
}
