//! `irrm inspect`: parameter/shape report and multiply-accumulate estimate.

use std::path::PathBuf;

use irrm_core::model::{load_model, IrrmModel};

use super::Flags;
use crate::config::Resolver;
use crate::{CliError, CliResult};

pub fn run(mut flags: Flags) -> CliResult<()> {
    let model_path = flags.take("model").map(PathBuf::from);
    let config_path = flags.take("config").map(PathBuf::from);
    let size = flags.take("size").unwrap_or_else(|| "256x256".to_string());
    let (h, w) = parse_size(&size)?;

    let model = match (&model_path, &config_path) {
        (Some(path), _) => load_model(path)?.0,
        (None, maybe_config) => {
            let mut resolver = Resolver::new();
            if let Some(path) = maybe_config {
                resolver.load_file(path)?;
            }
            resolver.apply_flags(&flags.into_config_pairs())?;
            let settings = resolver.resolve()?;
            eprint!("{}", resolver.echo());
            IrrmModel::init(settings.model, settings.train.seed)?
        }
    };

    let cfg = model.config();
    println!("scale = x{}", cfg.scale);
    println!("stages = {}", cfg.num_rdm());
    println!("irbs_per_rdm = {}", cfg.irbs_per_rdm);
    println!("hidden = {}", cfg.hidden);
    println!("eb_kind = {}", cfg.eb_kind);
    println!("coupling_mode = {}", cfg.coupling);
    println!("clamp_alpha = {}", cfg.clamp_alpha);
    println!("long_skip = {}", cfg.long_skip);
    println!();

    let summary = model.describe();
    for (name, shape) in &summary.entries {
        println!("{name}\t{shape}\t{}", shape.numel());
    }
    println!();
    println!("parameters = {}", summary.total);

    if h % cfg.scale != 0 || w % cfg.scale != 0 {
        return Err(CliError::Usage(format!(
            "--size {h}x{w} must be a multiple of the scale {}",
            cfg.scale
        )));
    }
    let macs = model.mac_count(h, w);
    let lr_pixels = (h / cfg.scale) * (w / cfg.scale);
    println!("macs_forward({h}x{w}) = {macs}");
    println!("macs_per_output_pixel = {}", macs / lr_pixels as u64);
    Ok(())
}

fn parse_size(s: &str) -> CliResult<(usize, usize)> {
    let parts: Vec<&str> = s.split('x').collect();
    if parts.len() == 2 {
        if let (Ok(h), Ok(w)) = (parts[0].parse(), parts[1].parse()) {
            return Ok((h, w));
        }
    }
    Err(CliError::Usage(format!("bad --size `{s}`, expected HxW")))
}
