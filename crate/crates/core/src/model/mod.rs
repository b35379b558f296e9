//! The invertible rescaling model: stacked 2x scale stages with exact
//! forward (downscale) and inverse (upscale) passes.

mod checkpoint;
mod eb;
mod irb;
mod rdm;

pub use checkpoint::{
    crc32, load_latents, load_model, moment_tensors, save_latents, save_model, Container,
    TensorEntry,
};
pub use eb::{EbConfig, EbKind, EnhancedBlock, FinalInit};
pub use irb::{CouplingMode, Irb};
pub use rdm::Rdm;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Element, Shape, Tensor};

/// Model architecture and initialization switches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    /// Total rescaling factor, 2 or 4; one 2x stage per factor of two.
    pub scale: usize,
    /// Image channels (3 for RGB).
    pub channels: usize,
    pub irbs_per_rdm: usize,
    /// Nominal hidden width of each enhanced block.
    pub hidden: usize,
    pub eb_kind: EbKind,
    pub coupling: CouplingMode,
    /// Clamp for multiplicative couplings: scales live in [e^-a, e^a].
    pub clamp_alpha: f64,
    /// Negative slope of the leaky activation.
    pub slope: f64,
    /// Zero-initialize the final conv of every block, making the whole model
    /// the identity map (bypass) at step zero. Disabling this reproduces the
    /// no-bypass ablation: small random final convs instead.
    pub long_skip: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::preset_s(2)
    }
}

impl ModelConfig {
    /// Small preset: 4 blocks per stage, width 32.
    pub fn preset_s(scale: usize) -> Self {
        ModelConfig {
            scale,
            channels: 3,
            irbs_per_rdm: 4,
            hidden: 32,
            eb_kind: EbKind::Rb,
            coupling: CouplingMode::ThreeBlock,
            clamp_alpha: 1.0,
            slope: 0.2,
            long_skip: true,
        }
    }

    /// Medium preset: 8 blocks per stage, width 48.
    pub fn preset_m(scale: usize) -> Self {
        ModelConfig {
            irbs_per_rdm: 8,
            hidden: 48,
            ..ModelConfig::preset_s(scale)
        }
    }

    /// Large preset: 12 blocks per stage, width 64.
    pub fn preset_l(scale: usize) -> Self {
        ModelConfig {
            irbs_per_rdm: 12,
            hidden: 64,
            ..ModelConfig::preset_s(scale)
        }
    }

    pub fn num_rdm(&self) -> usize {
        match self.scale {
            2 => 1,
            4 => 2,
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.scale, 2 | 4) {
            return Err(Error::invalid("model", "scale must be 2 or 4"));
        }
        if self.channels == 0 {
            return Err(Error::invalid("model", "channels must be positive"));
        }
        if self.hidden < 2 {
            return Err(Error::invalid("model", "hidden width must be at least 2"));
        }
        if self.clamp_alpha <= 0.0 {
            return Err(Error::invalid("model", "clamp_alpha must be positive"));
        }
        Ok(())
    }
}

/// Per-stage high-frequency latents: level k has shape
/// (n, 3C, H/2^k, W/2^k) for k = 1..num_rdm.
#[derive(Clone, Debug)]
pub struct LatentPyramid<T: Element = f32> {
    pub levels: Vec<Tensor<T>>,
}

impl<T: Element> LatentPyramid<T> {
    pub fn numel(&self) -> usize {
        self.levels.iter().map(|t| t.numel()).sum()
    }

    pub fn cast<U: Element>(&self) -> LatentPyramid<U> {
        LatentPyramid {
            levels: self.levels.iter().map(|t| t.cast()).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct IrrmModel<T: Element = f32> {
    cfg: ModelConfig,
    rdms: Vec<Rdm<T>>,
}

impl IrrmModel<f32> {
    pub fn init(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = Rng::seeded(seed);
        let rdms = (0..cfg.num_rdm())
            .map(|_| Rdm::init(&cfg, &mut rng))
            .collect();
        Ok(IrrmModel { cfg, rdms })
    }
}

impl<T: Element> IrrmModel<T> {
    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn scale(&self) -> usize {
        self.cfg.scale
    }

    /// Downscale: (y, z) with y at 1/scale resolution and one latent level
    /// per stage.
    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, LatentPyramid<T>)> {
        let s = x.shape();
        if s.c != self.cfg.channels {
            return Err(Error::invalid(
                "model_forward",
                format!(
                    "input has {} channels, model expects {}",
                    s.c, self.cfg.channels
                ),
            ));
        }
        if !s.h.is_multiple_of(self.cfg.scale) || !s.w.is_multiple_of(self.cfg.scale) {
            return Err(Error::invalid(
                "model_forward",
                format!(
                    "spatial dims of {s} must be divisible by {}; pad to the next multiple",
                    self.cfg.scale
                ),
            ));
        }
        let mut y = x.clone();
        let mut levels = Vec::with_capacity(self.rdms.len());
        for rdm in &self.rdms {
            let (next, z) = rdm.forward(&y)?;
            levels.push(z);
            y = next;
        }
        Ok((y, LatentPyramid { levels }))
    }

    /// Upscale: exact inverse of [`IrrmModel::forward`] given the same
    /// latents.
    pub fn inverse(&self, y: &Tensor<T>, z: &LatentPyramid<T>) -> Result<Tensor<T>> {
        if z.levels.len() != self.rdms.len() {
            return Err(Error::invalid(
                "model_inverse",
                format!(
                    "latent pyramid has {} levels, model has {} stages",
                    z.levels.len(),
                    self.rdms.len()
                ),
            ));
        }
        let mut x = y.clone();
        for (rdm, z_level) in self.rdms.iter().zip(z.levels.iter()).rev() {
            x = rdm.inverse(&x, z_level)?;
        }
        Ok(x)
    }

    /// Latent shapes for an HR input of (n, channels, h, w).
    pub fn latent_shapes(&self, n: usize, h: usize, w: usize) -> Vec<Shape> {
        (1..=self.rdms.len())
            .map(|k| Shape::new(n, 3 * self.cfg.channels, h >> k, w >> k))
            .collect()
    }

    pub fn count_params(&self) -> usize {
        self.params().iter().map(|(_, t)| t.numel()).sum()
    }

    /// Named parameter shapes plus the total count.
    pub fn describe(&self) -> ModelSummary {
        let entries = self
            .params()
            .into_iter()
            .map(|(name, t)| (name, t.shape()))
            .collect::<Vec<_>>();
        let total = entries.iter().map(|(_, s)| s.numel()).sum();
        ModelSummary { entries, total }
    }

    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (r, rdm) in self.rdms.iter().enumerate() {
            for (i, irb) in rdm.irbs().iter().enumerate() {
                for (e, eb) in irb.blocks().iter().enumerate() {
                    for (suffix, t) in eb.params() {
                        out.push((format!("rdm{r}.irb{i}.eb{e}.{suffix}"), t));
                    }
                }
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for (r, rdm) in self.rdms.iter_mut().enumerate() {
            for (i, irb) in rdm.irbs_mut().iter_mut().enumerate() {
                for (e, eb) in irb.blocks_mut().iter_mut().enumerate() {
                    for (suffix, t) in eb.params_mut() {
                        out.push((format!("rdm{r}.irb{i}.eb{e}.{suffix}"), t));
                    }
                }
            }
        }
        out
    }

    /// Per-sample latents, i.i.d. N(0, sigma^2), deterministic under seed.
    pub fn sample_latents(
        &self,
        n: usize,
        h: usize,
        w: usize,
        sigma: f64,
        seed: u64,
    ) -> Result<LatentPyramid<T>> {
        self.sample_latents_rng(n, h, w, sigma, &mut Rng::seeded(seed))
    }

    /// Same, drawing from a caller-provided stream.
    pub fn sample_latents_rng(
        &self,
        n: usize,
        h: usize,
        w: usize,
        sigma: f64,
        rng: &mut Rng,
    ) -> Result<LatentPyramid<T>> {
        if sigma < 0.0 {
            return Err(Error::invalid("sample_latents", "sigma must be >= 0"));
        }
        let levels = self
            .latent_shapes(n, h, w)
            .into_iter()
            .map(|s| {
                Tensor::from_parts(
                    s,
                    (0..s.numel())
                        .map(|_| T::from_f64(rng.gauss() * sigma))
                        .collect(),
                )
            })
            .collect();
        Ok(LatentPyramid { levels })
    }

    /// Multiply-accumulate count of one forward pass over an (h, w) input,
    /// summed over all convolutions.
    pub fn mac_count(&self, h: usize, w: usize) -> u64 {
        let mut macs = 0u64;
        let (mut sh, mut sw) = (h, w);
        for rdm in &self.rdms {
            sh /= 2;
            sw /= 2;
            let pixels = (sh * sw) as u64;
            for irb in rdm.irbs() {
                for eb in irb.blocks() {
                    let c = eb.config();
                    let hidden = c.effective_hidden() as u64;
                    macs += pixels * 9 * hidden * (c.in_channels as u64 + c.out_channels as u64);
                }
            }
        }
        macs
    }

    pub fn cast<U: Element>(&self) -> IrrmModel<U> {
        IrrmModel {
            cfg: self.cfg,
            rdms: self.rdms.iter().map(|r| r.cast()).collect(),
        }
    }

    pub fn rdms(&self) -> &[Rdm<T>] {
        &self.rdms
    }
}

#[derive(Clone, Debug)]
pub struct ModelSummary {
    pub entries: Vec<(String, Shape)>,
    pub total: usize,
}
