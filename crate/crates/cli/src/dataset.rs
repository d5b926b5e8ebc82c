//! Manifest-backed dataset access shared by the subcommands.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use planarkit::grid::{DepthMap, Grid};
use planarkit::io::{
    read_depth, read_intrinsics, read_manifest, read_scene_meta, read_seg_png, read_sidecar,
    ManifestEntry, SceneMeta,
};
use planarkit::masks::InstanceMaskSet;
use planarkit::CameraIntrinsics;

/// One manifest entry with its directory resolved.
pub struct Sample {
    pub entry: ManifestEntry,
    pub dir: PathBuf,
}

impl Sample {
    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    pub fn pred_depth(&self) -> Result<DepthMap> {
        read_depth(&self.path(&self.entry.depth_path))
            .with_context(|| format!("sample {}: predicted depth", self.entry.id))
    }

    pub fn gt_depth(&self) -> Result<DepthMap> {
        read_depth(&self.path(&self.entry.gt_depth_path))
            .with_context(|| format!("sample {}: ground-truth depth", self.entry.id))
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        read_intrinsics(&self.path(&self.entry.intrinsics_path))
            .with_context(|| format!("sample {}: intrinsics", self.entry.id))
    }

    pub fn meta(&self) -> Result<SceneMeta> {
        read_scene_meta(&self.path(&self.entry.meta_path))
            .with_context(|| format!("sample {}: metadata", self.entry.id))
    }

    /// Predicted instance-id grid.
    pub fn pred_seg(&self) -> Result<Grid<u32>> {
        read_seg_png(&self.path(&self.entry.seg_path))
            .with_context(|| format!("sample {}: predicted segmentation", self.entry.id))
    }

    /// Predicted masks with scores/boxes from the sidecar next to the
    /// segmentation grid.
    pub fn pred_masks(&self) -> Result<InstanceMaskSet> {
        let seg = self.pred_seg()?;
        let sidecar_path = sidecar_path(&self.path(&self.entry.seg_path));
        let sidecar = read_sidecar(&sidecar_path)
            .with_context(|| format!("sample {}: segmentation sidecar", self.entry.id))?;
        sidecar.validate(&seg, &sidecar_path)?;
        Ok(sidecar.into_mask_set(&seg))
    }

    /// Ground-truth instance-id grid referenced from the metadata record.
    pub fn gt_seg(&self) -> Result<Grid<u32>> {
        let meta = self.meta()?;
        read_seg_png(&self.dir.join(&meta.gt_seg_path))
            .with_context(|| format!("sample {}: ground-truth segmentation", self.entry.id))
    }
}

/// Sidecar convention: `<seg file>.json`.
pub fn sidecar_path(seg_path: &Path) -> PathBuf {
    let mut os = seg_path.as_os_str().to_os_string();
    os.push(".json");
    PathBuf::from(os)
}

pub fn load_samples(manifest: &Path) -> Result<Vec<Sample>> {
    let entries =
        read_manifest(manifest).with_context(|| format!("manifest {}", manifest.display()))?;
    let dir = manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(entries
        .into_iter()
        .map(|entry| Sample {
            entry,
            dir: dir.clone(),
        })
        .collect())
}

/// Runs `f` over every sample on a pool of `jobs` threads (0 = default),
/// returning results in manifest order.
pub fn for_each_sample<T, F>(samples: &[Sample], jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &Sample) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")?;
    let results: Vec<Result<T>> = pool.install(|| {
        (0..samples.len())
            .into_par_iter()
            .map(|i| f(i, &samples[i]))
            .collect()
    });
    results.into_iter().collect()
}
