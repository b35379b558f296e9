//! Subcommands plus the flag parser and image plumbing they share.

pub mod downscale;
pub mod eval;
pub mod inspect;
pub mod train;
pub mod upscale;
pub mod zsweep;

use std::path::{Path, PathBuf};

use irrm_core::metrics_io::{from_tensor, load_png, to_tensor, ImageU8};
use irrm_core::Tensor;

use crate::{CliError, CliResult};

/// Parse `--key value` pairs; a flag followed by another flag (or nothing)
/// is a boolean switch and reads as `true`. Dashes normalize to underscores.
pub fn parse_flags(args: &[String]) -> CliResult<Flags> {
    let mut pairs = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let token = &args[i];
        let Some(name) = token.strip_prefix("--") else {
            return Err(CliError::Usage(format!("expected a --flag, got `{token}`")));
        };
        let key = name.replace('-', "_");
        let value = match args.get(i + 1) {
            Some(next) if !next.starts_with("--") => {
                i += 1;
                next.clone()
            }
            _ => "true".to_string(),
        };
        pairs.push((key, value));
        i += 1;
    }
    Ok(Flags { pairs })
}

pub struct Flags {
    pairs: Vec<(String, String)>,
}

impl Flags {
    /// Remove and return a structural flag (path, file name, ...).
    pub fn take(&mut self, key: &str) -> Option<String> {
        let idx = self.pairs.iter().position(|(k, _)| k == key)?;
        Some(self.pairs.remove(idx).1)
    }

    pub fn take_required(&mut self, key: &str) -> CliResult<String> {
        self.take(key).ok_or_else(|| {
            CliError::Usage(format!("missing required flag --{}", key.replace('_', "-")))
        })
    }

    /// Whatever was not consumed structurally; interpreted as config keys.
    pub fn into_config_pairs(self) -> Vec<(String, String)> {
        self.pairs
    }
}

pub fn list_pngs(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|e| e.eq_ignore_ascii_case("png"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!(
            "no .png files in {}",
            dir.display()
        )));
    }
    Ok(files)
}

pub fn reflect_pad(t: &Tensor<f32>, m: usize) -> Tensor<f32> {
    t.reflect_pad_to_multiple(m)
}

pub fn crop_spatial(t: &Tensor<f32>, h: usize, w: usize) -> Tensor<f32> {
    t.crop_spatial(h, w)
}

/// Load a PNG as a [0,1] tensor, reflect-padded to a multiple of `m`.
/// Returns the original dims for cropping after the inverse pass.
pub fn load_image_padded(path: &Path, m: usize) -> CliResult<(Tensor<f32>, usize, usize)> {
    let img = load_png(path)?;
    let t: Tensor<f32> = to_tensor(&img);
    let s = t.shape();
    Ok((t.reflect_pad_to_multiple(m), s.h, s.w))
}

pub fn tensor_to_image(t: &Tensor<f32>) -> CliResult<ImageU8> {
    Ok(from_tensor(t)?)
}

/// Deterministic sub-seed for (image, draw) pairs.
pub fn mix_seed(seed: u64, image: u64, draw: u64) -> u64 {
    let mut x =
        seed ^ image.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ draw.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x
}

/// Eval parallelism: IRRM_THREADS caps the worker count; default is the
/// machine parallelism, never more than the number of items.
pub fn thread_cap(items: usize) -> usize {
    let hw = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = std::env::var("IRRM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(hw);
    cap.min(items).max(1)
}
