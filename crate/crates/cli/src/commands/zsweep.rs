//! `irrm zsweep`: reconstruct one image with latents scaled by a list of
//! sigmas; the same unit draw is scaled so the sweep isolates the sigma.

use std::path::PathBuf;

use irrm_core::metrics_io::{psnr_y, save_png};
use irrm_core::model::{load_model, LatentPyramid};

use super::{downscale::reject_leftovers, Flags};
use crate::{CliError, CliResult};

pub fn run(mut flags: Flags) -> CliResult<()> {
    let model_path = PathBuf::from(flags.take_required("model")?);
    let input = PathBuf::from(flags.take_required("in")?);
    let out_dir = PathBuf::from(flags.take_required("out")?);
    let sigmas_raw = flags
        .take("sigmas")
        .unwrap_or_else(|| "0,0.5,1,2".to_string());
    let seed: u64 = match flags.take("seed") {
        Some(v) => v
            .parse()
            .map_err(|_| CliError::Usage(format!("bad --seed `{v}`")))?,
        None => 0,
    };
    reject_leftovers(flags)?;

    let sigmas: Vec<f64> = sigmas_raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad sigma `{s}` in --sigmas")))
        })
        .collect::<CliResult<_>>()?;
    if sigmas.is_empty() {
        return Err(CliError::Usage("--sigmas needs at least one value".into()));
    }
    if sigmas.iter().any(|&s| s < 0.0) {
        return Err(CliError::Usage("sigmas must be >= 0".into()));
    }

    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;

    let (model, _) = load_model(&model_path)?;
    let (x, orig_h, orig_w) = super::load_image_padded(&input, model.scale())?;
    let ps = x.shape();
    let (y, _) = model.forward(&x)?;
    let unit = model.sample_latents(1, ps.h, ps.w, 1.0, seed)?;

    let reconstruct = |sigma: f64| -> CliResult<irrm_core::metrics_io::ImageU8> {
        let z = LatentPyramid {
            levels: unit.levels.iter().map(|l| l.mul_scalar(sigma)).collect(),
        };
        let x_hat = model.inverse(&y, &z)?;
        let x_hat = super::crop_spatial(&x_hat, orig_h, orig_w);
        super::tensor_to_image(&x_hat)
    };

    let baseline = reconstruct(0.0)?;
    println!("sigma\tpsnr_vs_sigma0");
    for &sigma in &sigmas {
        let img = reconstruct(sigma)?;
        let path = out_dir.join(format!("recon_sigma{sigma}.png"));
        save_png(&img, &path)?;
        let p = psnr_y(&baseline, &img, model.scale())?;
        println!("{sigma}\t{p}");
    }
    Ok(())
}
