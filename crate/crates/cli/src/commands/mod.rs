pub mod eval;
pub mod fit_planes;
pub mod losses;
pub mod render_pd;
pub mod synth;

use std::path::Path;

use anyhow::{Context, Result};

use planarkit::io::ToolkitConfig;

pub fn load_config(path: Option<&Path>) -> Result<ToolkitConfig> {
    match path {
        Some(p) => ToolkitConfig::load(p).with_context(|| format!("config {}", p.display())),
        None => Ok(ToolkitConfig::default()),
    }
}

pub fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
