//! `irrm upscale`: LR image + (stored | sampled) latents -> HR PNG.

use std::path::PathBuf;

use irrm_core::metrics_io::{load_png, save_png, to_tensor};
use irrm_core::model::{load_latents, load_model, Container};

use super::{downscale::reject_leftovers, Flags};
use crate::{CliError, CliResult};

pub fn run(mut flags: Flags) -> CliResult<()> {
    let model_path = PathBuf::from(flags.take_required("model")?);
    let in_lr = PathBuf::from(flags.take_required("in_lr")?);
    let out = PathBuf::from(flags.take_required("out")?);
    let z_path = flags.take("z").map(PathBuf::from);
    let sigma: f64 = match flags.take("sample_sigma") {
        Some(v) => v
            .parse()
            .map_err(|_| CliError::Usage(format!("bad --sample-sigma `{v}`")))?,
        None => 1.0,
    };
    let seed: u64 = match flags.take("seed") {
        Some(v) => v
            .parse()
            .map_err(|_| CliError::Usage(format!("bad --seed `{v}`")))?,
        None => 0,
    };
    reject_leftovers(flags)?;

    let (model, _) = load_model(&model_path)?;
    let img = load_png(&in_lr)?;
    let y_png: irrm_core::Tensor<f32> = to_tensor(&img);

    let (y, z, orig_dims) = match &z_path {
        Some(path) => {
            let (z, stored_y) = load_latents(path)?;
            let container = Container::read(path)?;
            let dims = match (
                container.header_get("orig_h"),
                container.header_get("orig_w"),
            ) {
                (Some(h), Some(w)) => h.parse().ok().zip(w.parse().ok()),
                _ => None,
            };
            let y = match stored_y {
                Some(exact) if exact.shape() == y_png.shape() => {
                    eprintln!("using exact LR tensor from {}", path.display());
                    exact
                }
                Some(exact) => {
                    return Err(CliError::Data(format!(
                        "stored LR tensor is {} but {} decodes to {}",
                        exact.shape(),
                        in_lr.display(),
                        y_png.shape()
                    )));
                }
                None => y_png,
            };
            (y, z, dims)
        }
        None => {
            let s = y_png.shape();
            let scale = model.scale();
            let z = model.sample_latents(s.n, s.h * scale, s.w * scale, sigma, seed)?;
            (y_png, z, None)
        }
    };

    let x = model.inverse(&y, &z)?;
    let x = match orig_dims {
        Some((h, w)) => super::crop_spatial(&x, h, w),
        None => x,
    };
    save_png(&super::tensor_to_image(&x)?, &out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}
