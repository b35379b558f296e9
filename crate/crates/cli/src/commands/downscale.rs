//! `irrm downscale`: HR image -> LR PNG plus latent container.

use std::path::PathBuf;

use irrm_core::metrics_io::save_png;
use irrm_core::model::{load_model, save_latents};

use super::Flags;
use crate::{CliError, CliResult};

pub fn run(mut flags: Flags) -> CliResult<()> {
    let model_path = PathBuf::from(flags.take_required("model")?);
    let input = PathBuf::from(flags.take_required("in")?);
    let out_lr = PathBuf::from(flags.take_required("out_lr")?);
    let out_z = flags.take("out_z").map(PathBuf::from);
    let quantize = flags
        .take("quantize_lr")
        .map(|v| v == "true")
        .unwrap_or(false);
    reject_leftovers(flags)?;

    let (model, _) = load_model(&model_path)?;
    eprintln!(
        "model: scale x{}, {} parameters",
        model.scale(),
        model.count_params()
    );
    let (x, orig_h, orig_w) = super::load_image_padded(&input, model.scale())?;
    let (y, z) = model.forward(&x)?;
    let y_stored = if quantize { y.quantize8() } else { y };

    let img = super::tensor_to_image(&y_stored)?;
    save_png(&img, &out_lr)?;
    eprintln!("wrote {}", out_lr.display());

    if let Some(z_path) = out_z {
        // the container carries the exact LR tensor (quantized only when
        // asked), so an upscale from it is not limited by the 8-bit PNG
        save_latents_with_dims(&z, &y_stored, orig_h, orig_w, &z_path)?;
        eprintln!("wrote {}", z_path.display());
    }
    Ok(())
}

fn save_latents_with_dims(
    z: &irrm_core::model::LatentPyramid<f32>,
    y: &irrm_core::Tensor<f32>,
    orig_h: usize,
    orig_w: usize,
    path: &std::path::Path,
) -> CliResult<()> {
    save_latents(z, Some(y), path)?;
    // re-write with original dims recorded in the header
    let mut container = irrm_core::model::Container::read(path)?;
    container
        .header
        .push(("orig_h".to_string(), orig_h.to_string()));
    container
        .header
        .push(("orig_w".to_string(), orig_w.to_string()));
    container.write(path)?;
    Ok(())
}

pub(super) fn reject_leftovers(flags: Flags) -> CliResult<()> {
    let rest = flags.into_config_pairs();
    if let Some((key, _)) = rest.first() {
        return Err(CliError::Usage(format!("unexpected flag --{key}")));
    }
    Ok(())
}
