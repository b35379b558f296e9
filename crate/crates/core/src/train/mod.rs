//! Training: the three-term objective, Adam, deterministic patch sampling
//! with dihedral augmentation, and the single-threaded training loop.

mod adam;
mod loss;
mod sampler;
mod trainer;

pub use adam::AdamState;
pub use loss::{loss_back, loss_forw, loss_latent, total_loss, LossTerms};
pub use sampler::{dihedral, sample_batch, Dataset};
pub use trainer::{
    format_log_line, load_train_state, lr_at, save_train_checkpoint, TrainRecord, Trainer,
};

use crate::error::{Error, Result};

/// Loss weights, optimizer constants, schedule, and sampling switches.
///
/// Defaults are the desk-scale configuration: 64-pixel patches, batch 4,
/// 2000 steps. The loss weights (8, 8, 1), Adam betas (0.9, 0.999), initial
/// learning rate 2e-4 and the halve-every-10k schedule are the production
/// training values and stay at those defaults.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lr0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub halve_every: u64,
    pub batch: usize,
    pub patch: usize,
    pub augment_flip: bool,
    pub augment_rotate: bool,
    pub seed: u64,
    pub total_steps: u64,
    /// Global-norm gradient clip; zero or negative disables clipping.
    pub grad_clip: f64,
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda1: 8.0,
            lambda2: 8.0,
            lambda3: 1.0,
            lr0: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            halve_every: 10_000,
            batch: 4,
            patch: 64,
            augment_flip: true,
            augment_rotate: true,
            seed: 0,
            total_steps: 2000,
            grad_clip: 5.0,
            checkpoint_every: 500,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, scale: usize) -> Result<()> {
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 || self.lambda3 < 0.0 {
            return Err(Error::invalid("train", "loss weights must be >= 0"));
        }
        if self.lr0 <= 0.0 {
            return Err(Error::invalid("train", "lr0 must be positive"));
        }
        if self.batch == 0 {
            return Err(Error::invalid("train", "batch must be positive"));
        }
        if self.patch == 0 || !self.patch.is_multiple_of(scale) {
            return Err(Error::invalid(
                "train",
                format!(
                    "patch {} must be a positive multiple of scale {scale}",
                    self.patch
                ),
            ));
        }
        if self.halve_every == 0 {
            return Err(Error::invalid("train", "halve_every must be positive"));
        }
        Ok(())
    }
}
