//! Command-line interface: dataset synthesis, loss evaluation, plane
//! fitting, planar depth rendering and metric reports over manifests.
//!
//! Every subcommand takes `--seed`, `--config`, `--out` and `--jobs`. Work
//! over manifest entries runs on a rayon pool sized by `--jobs`, but all
//! outputs are collected in manifest order and reduced sequentially, so
//! reports are byte-identical for any job count.

mod commands;
mod dataset;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "planarkit", version, about = "Piece-wise planar depth toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug)]
struct Common {
    /// Base RNG seed; all randomized steps derive their streams from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Flat TOML config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 = one per hardware thread.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (depth, segmentation, metadata,
    /// manifest) from the analytic scene generator.
    Synth(commands::synth::SynthArgs),
    /// Compute the loss breakdown and gradient spot-checks for one sample.
    Losses(commands::losses::LossesArgs),
    /// Fit a plane to every instance of every image and report parameters.
    FitPlanes(commands::fit_planes::FitPlanesArgs),
    /// Re-render per-instance depth from fitted planes.
    RenderPd(commands::render_pd::RenderPdArgs),
    /// Standard depth metrics over a manifest.
    EvalDepth(commands::eval::EvalDepthArgs),
    /// Mask/box average precision over a manifest.
    EvalSeg(commands::eval::EvalSegArgs),
    /// Planarity, boundary and directed depth error over a manifest.
    EvalIbims(commands::eval::EvalIbimsArgs),
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Losses(args) => commands::losses::run(args),
        Command::FitPlanes(args) => commands::fit_planes::run(args),
        Command::RenderPd(args) => commands::render_pd::run(args),
        Command::EvalDepth(args) => commands::eval::run_depth(args),
        Command::EvalSeg(args) => commands::eval::run_seg(args),
        Command::EvalIbims(args) => commands::eval::run_ibims(args),
    }
}
