//! `losses`: loss breakdown plus gradient spot-checks for one sample.

use anyhow::{bail, Context, Result};
use clap::Args;

use planarkit::derive_seed;
use planarkit::gradient::{dgs_loss, dgs_loss_grad, gradient_map};
use planarkit::losses::{dice_loss, focal_loss, rmse_loss, total_loss, LossParts};
use planarkit::masks::InstanceMaskSet;
use planarkit::normal::{psn_loss_for_batch, psn_loss_grad_for_batch, psn_triplets};

use crate::dataset::load_samples;
use crate::Common;

#[derive(Args)]
pub struct LossesArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset manifest (JSON lines).
    #[arg(long)]
    manifest: std::path::PathBuf,
    /// Sample id to evaluate; defaults to the first manifest entry.
    #[arg(long)]
    id: Option<String>,
    /// Finite-difference spot checks per gradient.
    #[arg(long, default_value_t = 20)]
    grad_checks: usize,
}

pub fn run(args: LossesArgs) -> Result<()> {
    let cfg = super::load_config(args.common.config.as_deref())?;
    super::ensure_out_dir(&args.common.out)?;
    let samples = load_samples(&args.manifest)?;
    let sample = match &args.id {
        Some(id) => samples
            .iter()
            .find(|s| &s.entry.id == id)
            .with_context(|| format!("no sample with id `{id}`"))?,
        None => samples.first().context("manifest is empty")?,
    };

    let pred = sample.pred_depth()?;
    let gt = sample.gt_depth()?;
    let cam = sample.intrinsics()?;
    let gt_seg = sample.gt_seg()?;
    let pred_masks = sample.pred_masks()?;
    let gt_masks = InstanceMaskSet::from_instance_ids(&gt_seg, None);

    // Classification: detection scores against all-positive targets.
    let targets = vec![true; pred_masks.len()];
    let focal = focal_loss(&pred_masks.scores, &targets, cfg.focal_alpha, cfg.focal_gamma)?;

    // Segmentation overlap: mean dice over ids present on both sides.
    let paired = pred_masks.len().min(gt_masks.len());
    let dice = if paired == 0 {
        0.0
    } else {
        let mut acc = 0.0;
        for i in 0..paired {
            acc += dice_loss(&pred_masks.masks[i], &gt_masks.masks[i])?;
        }
        acc / paired as f64
    };

    let (rmse, rmse_grad) = rmse_loss(&pred, &gt)?;

    let gmap = gradient_map(&gt)?;
    let dgs = dgs_loss(&gmap, &pred_masks)?;

    let sampling = cfg.sampling_config(derive_seed(args.common.seed, 0x9a));
    let batch = psn_triplets(&pred, &gt_seg, &cam, &sampling)?;
    let psn = psn_loss_for_batch(&pred, &gt, &gt_seg, &cam, &batch)?;

    let breakdown = total_loss(
        &LossParts {
            focal,
            dice,
            rmse,
            dgs,
            psn: psn.value,
        },
        &cfg.loss_weights(),
    )?;

    // Gradient spot checks against central finite differences. Pairs that
    // are both numerically zero (at a loss minimum the finite difference is
    // pure roundoff) count as agreeing.
    let eps = 1e-4;
    let agree = |analytic: f64, fd: f64| -> f64 {
        if analytic.abs().max(fd.abs()) < 1e-6 {
            0.0
        } else {
            (analytic - fd).abs() / fd.abs().max(1e-7)
        }
    };
    let mut check_rng = derive_seed(args.common.seed, 0x6d);
    let mut next = move |bound: usize| {
        check_rng = derive_seed(check_rng, 1);
        (check_rng % bound as u64) as usize
    };
    let (w, h) = (pred.width(), pred.height());

    let mut rmse_err: f64 = 0.0;
    for _ in 0..args.grad_checks {
        let (x, y) = (next(w), next(h));
        if !(pred.valid.at(x, y) && gt.valid.at(x, y)) {
            continue;
        }
        let mut plus = pred.clone();
        plus.values.set(x, y, plus.values.at(x, y) + eps);
        let mut minus = pred.clone();
        minus.values.set(x, y, minus.values.at(x, y) - eps);
        let fd = (rmse_loss(&plus, &gt)?.0 - rmse_loss(&minus, &gt)?.0) / (2.0 * eps);
        rmse_err = rmse_err.max(agree(rmse_grad.at(x, y), fd));
    }

    let dgs_grads = dgs_loss_grad(&gmap, &pred_masks)?;
    let mut dgs_err: f64 = 0.0;
    if !pred_masks.is_empty() {
        for _ in 0..args.grad_checks {
            let (x, y, j) = (next(w), next(h), next(pred_masks.len()));
            let base = pred_masks.masks[j].at(x, y);
            let delta = eps.min(base.min(1.0 - base));
            if delta <= 0.0 {
                // At the [0,1] boundary use a one-sided difference.
                let step = eps;
                let mut shifted = pred_masks.clone();
                let dir = if base < 0.5 { 1.0 } else { -1.0 };
                shifted.masks[j].set(x, y, base + dir * step);
                let fd = dir * (dgs_loss(&gmap, &shifted)? - dgs) / step;
                dgs_err = dgs_err.max(agree(dgs_grads[j].at(x, y), fd));
                continue;
            }
            let mut plus = pred_masks.clone();
            plus.masks[j].set(x, y, base + delta);
            let mut minus = pred_masks.clone();
            minus.masks[j].set(x, y, base - delta);
            let fd = (dgs_loss(&gmap, &plus)? - dgs_loss(&gmap, &minus)?) / (2.0 * delta);
            dgs_err = dgs_err.max(agree(dgs_grads[j].at(x, y), fd));
        }
    }

    let psn_grad = psn_loss_grad_for_batch(&pred, &gt, &gt_seg, &cam, &batch)?;
    let mut psn_err: f64 = 0.0;
    for _ in 0..args.grad_checks {
        let (x, y) = (next(w), next(h));
        if !pred.valid.at(x, y) {
            continue;
        }
        let mut plus = pred.clone();
        plus.values.set(x, y, plus.values.at(x, y) + eps);
        let mut minus = pred.clone();
        minus.values.set(x, y, minus.values.at(x, y) - eps);
        let lp = psn_loss_for_batch(&plus, &gt, &gt_seg, &cam, &batch)?.value;
        let lm = psn_loss_for_batch(&minus, &gt, &gt_seg, &cam, &batch)?.value;
        let fd = (lp - lm) / (2.0 * eps);
        psn_err = psn_err.max(agree(psn_grad.at(x, y), fd));
    }

    for (name, err) in [("rmse", rmse_err), ("dgs", dgs_err), ("psn", psn_err)] {
        if err > 1e-4 {
            bail!("{name} gradient disagrees with finite differences: max rel err {err}");
        }
    }

    let mut text = breakdown.to_string();
    text.push('\n');
    text.push_str(&format!("grad_check_rmse_max_rel_err = {rmse_err}\n"));
    text.push_str(&format!("grad_check_dgs_max_rel_err = {dgs_err}\n"));
    text.push_str(&format!("grad_check_psn_max_rel_err = {psn_err}\n"));
    text.push_str(&format!("psn_triplets_used = {}\n", psn.used));

    print!("{text}");
    let stem = format!("losses_{}", sample.entry.id);
    super::write_text(&args.common.out.join(format!("{stem}.txt")), &text)?;
    let json = serde_json::to_string_pretty(&breakdown)?;
    super::write_text(&args.common.out.join(format!("{stem}.json")), &json)?;
    Ok(())
}
