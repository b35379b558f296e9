//! Deterministic patch sampling with dihedral augmentation.

use crate::error::{Error, Result};
use crate::metrics_io::bicubic_resize;
use crate::rng::Rng;
use crate::tensor::{Shape, Tensor};

use super::TrainConfig;

/// In-memory training set: each image is a (1, c, h, w) tensor on [0, 1].
#[derive(Clone, Debug)]
pub struct Dataset {
    pub images: Vec<Tensor<f32>>,
}

impl Dataset {
    pub fn new(images: Vec<Tensor<f32>>) -> Self {
        Dataset { images }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Indices of images large enough for `patch`; smaller ones are skipped.
    pub fn usable(&self, patch: usize) -> Vec<usize> {
        (0..self.images.len())
            .filter(|&i| {
                let s = self.images[i].shape();
                s.h >= patch && s.w >= patch
            })
            .collect()
    }
}

/// One of the 8 dihedral transforms of a square (c, size, size) patch:
/// optional horizontal mirror followed by `rot` quarter turns.
pub fn dihedral(data: &[f32], channels: usize, size: usize, rot: usize, mirror: bool) -> Vec<f32> {
    let mut cur = data.to_vec();
    let plane = size * size;
    if mirror {
        let mut out = vec![0.0; cur.len()];
        for ch in 0..channels {
            for r in 0..size {
                for c in 0..size {
                    out[ch * plane + r * size + c] = cur[ch * plane + r * size + (size - 1 - c)];
                }
            }
        }
        cur = out;
    }
    for _ in 0..rot % 4 {
        let mut out = vec![0.0; cur.len()];
        // quarter turn clockwise: out(r, c) = in(size-1-c, r)
        for ch in 0..channels {
            for r in 0..size {
                for c in 0..size {
                    out[ch * plane + r * size + c] = cur[ch * plane + (size - 1 - c) * size + r];
                }
            }
        }
        cur = out;
    }
    cur
}

/// Draw one batch of augmented HR patches and their bicubic LR targets.
/// Consumes a fixed number of draws per batch element, so a given (seed,
/// step) stream always yields the same batch.
pub fn sample_batch(
    dataset: &Dataset,
    cfg: &TrainConfig,
    scale: usize,
    rng: &mut Rng,
) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let usable = dataset.usable(cfg.patch);
    if usable.is_empty() {
        return Err(Error::Dataset(format!(
            "no image is at least {0}x{0}",
            cfg.patch
        )));
    }
    let p = cfg.patch;
    let channels = dataset.images[usable[0]].shape().c;
    let mut batch = vec![0.0f32; cfg.batch * channels * p * p];
    for b in 0..cfg.batch {
        let img = &dataset.images[usable[rng.below(usable.len())]];
        let s = img.shape();
        let oy = rng.below(s.h - p + 1);
        let ox = rng.below(s.w - p + 1);
        let rot = if cfg.augment_rotate { rng.below(4) } else { 0 };
        let mirror = cfg.augment_flip && rng.below(2) == 1;

        let mut crop = vec![0.0f32; channels * p * p];
        for ch in 0..channels {
            for r in 0..p {
                let src = (ch * s.h + oy + r) * s.w + ox;
                crop[(ch * p + r) * p..(ch * p + r) * p + p]
                    .copy_from_slice(&img.data()[src..src + p]);
            }
        }
        let aug = dihedral(&crop, channels, p, rot, mirror);
        batch[b * channels * p * p..(b + 1) * channels * p * p].copy_from_slice(&aug);
    }
    let x = Tensor::from_vec(Shape::new(cfg.batch, channels, p, p), batch)?;
    let y_gt = bicubic_resize(&x, 1.0 / scale as f64)?;
    Ok((x, y_gt))
}
