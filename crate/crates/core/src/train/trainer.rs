//! Single-threaded training loop: deterministic per-step streams derived
//! from (seed, step), so an interrupted run resumed from a checkpoint
//! follows the exact trajectory of an uninterrupted one.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{load_model, moment_tensors, save_model, Container, IrrmModel, TensorEntry};
use crate::rng::Rng;
use crate::tensor::Recording;

use super::adam::AdamState;
use super::loss::total_loss;
use super::sampler::{sample_batch, Dataset};
use super::TrainConfig;

/// lr0 halved every `halve_every` steps (0-based step index).
pub fn lr_at(step: u64, cfg: &TrainConfig) -> f64 {
    cfg.lr0 * 0.5f64.powi((step / cfg.halve_every) as i32)
}

#[derive(Clone, Copy, Debug)]
pub struct TrainRecord {
    /// 1-based step count after this update.
    pub step: u64,
    pub total: f64,
    pub back: f64,
    pub forw: f64,
    pub latent: f64,
    /// Global gradient L2 norm before clipping.
    pub grad_norm: f64,
    pub lr: f64,
}

/// One log line per step, 9 significant digits, tab separated.
pub fn format_log_line(r: &TrainRecord) -> String {
    format!(
        "{}\t{:.8e}\t{:.8e}\t{:.8e}\t{:.8e}\t{:.8e}\t{:.8e}",
        r.step, r.total, r.back, r.forw, r.latent, r.grad_norm, r.lr
    )
}

pub struct Trainer {
    model: IrrmModel<f32>,
    cfg: TrainConfig,
    adam: AdamState,
    dataset: Dataset,
}

impl Trainer {
    pub fn new(model: IrrmModel<f32>, dataset: Dataset, cfg: TrainConfig) -> Result<Self> {
        Trainer::with_state(model, dataset, cfg, AdamState::new())
    }

    pub fn with_state(
        model: IrrmModel<f32>,
        dataset: Dataset,
        cfg: TrainConfig,
        adam: AdamState,
    ) -> Result<Self> {
        cfg.validate(model.scale())?;
        if dataset.usable(cfg.patch).is_empty() {
            return Err(Error::Dataset(format!(
                "no image is at least {0}x{0}; nothing to train on",
                cfg.patch
            )));
        }
        Ok(Trainer {
            model,
            cfg,
            adam,
            dataset,
        })
    }

    pub fn model(&self) -> &IrrmModel<f32> {
        &self.model
    }

    pub fn into_model(self) -> IrrmModel<f32> {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn adam_state(&self) -> &AdamState {
        &self.adam
    }

    pub fn completed_steps(&self) -> u64 {
        self.adam.step
    }

    /// One optimization step. The step stream (batch, augmentation, latent
    /// draw) is a pure function of (seed, step index).
    pub fn step(&mut self) -> Result<TrainRecord> {
        let idx = self.adam.step;
        let lr = lr_at(idx, &self.cfg);
        let mut rng = Rng::for_stream(self.cfg.seed, idx);
        let (x, y_gt) = sample_batch(&self.dataset, &self.cfg, self.model.scale(), &mut rng)?;
        let xs = x.shape();
        let z = self
            .model
            .sample_latents_rng(xs.n, xs.h, xs.w, 1.0, &mut rng)?;

        let rec = Recording::<f32>::start();
        let terms = total_loss(
            &self.model,
            &x,
            &y_gt,
            &z,
            (self.cfg.lambda1, self.cfg.lambda2, self.cfg.lambda3),
        )?;
        let total = terms.total.item() as f64;
        if !total.is_finite() {
            return Err(Error::NonFinite {
                what: "training loss".into(),
                step: idx + 1,
            });
        }
        let record = TrainRecord {
            step: idx + 1,
            total,
            back: terms.back.item() as f64,
            forw: terms.forw.item() as f64,
            latent: terms.latent.item() as f64,
            grad_norm: 0.0,
            lr,
        };
        let mut grads = rec.backward(&terms.total)?;
        let grad_norm = grads.global_norm();
        if !grad_norm.is_finite() {
            return Err(Error::NonFinite {
                what: "gradient norm".into(),
                step: idx + 1,
            });
        }
        if self.cfg.grad_clip > 0.0 && grad_norm > self.cfg.grad_clip {
            grads.scale(self.cfg.grad_clip / grad_norm);
        }
        let t = idx + 1;
        for (name, p) in self.model.params_mut() {
            if let Some(g) = grads.get(p) {
                let g = g.clone();
                self.adam.update(&name, p, g.data(), lr, t, &self.cfg)?;
            }
        }
        self.adam.step = t;
        Ok(TrainRecord {
            grad_norm,
            ..record
        })
    }

    /// Drive training to `total_steps`, appending one log line per step and
    /// invoking `on_checkpoint` every `checkpoint_every` steps. On a
    /// non-finite loss the error propagates and previously written
    /// checkpoints are left in place.
    pub fn run<W: Write>(
        &mut self,
        log: &mut W,
        mut on_checkpoint: impl FnMut(&Trainer, u64) -> Result<()>,
    ) -> Result<()> {
        while self.adam.step < self.cfg.total_steps {
            let record = self.step()?;
            writeln!(log, "{}", format_log_line(&record))?;
            if self.cfg.checkpoint_every > 0 && record.step % self.cfg.checkpoint_every == 0 {
                on_checkpoint(self, record.step)?;
            }
        }
        Ok(())
    }
}

/// Write model weights plus optimizer state (step, seed, moments).
pub fn save_train_checkpoint(trainer: &Trainer, path: &Path) -> Result<()> {
    let extra = vec![
        ("step".to_string(), trainer.adam.step.to_string()),
        ("seed".to_string(), trainer.cfg.seed.to_string()),
    ];
    let mut tensors = Vec::new();
    for (name, p) in trainer.model.params() {
        let s = p.shape();
        let dims = vec![s.n as u32, s.c as u32, s.h as u32, s.w as u32];
        if let Some(m) = trainer.adam.m.get(&name) {
            tensors.push(TensorEntry {
                name: format!("opt.m.{name}"),
                dims: dims.clone(),
                data: m.clone(),
            });
        }
        if let Some(v) = trainer.adam.v.get(&name) {
            tensors.push(TensorEntry {
                name: format!("opt.v.{name}"),
                dims,
                data: v.clone(),
            });
        }
    }
    save_model(&trainer.model, &extra, tensors, path)
}

/// Restore model and optimizer state from a training checkpoint.
pub fn load_train_state(path: &Path) -> Result<(IrrmModel<f32>, AdamState)> {
    let (model, container) = load_model(path)?;
    let adam = adam_from_container(&container);
    Ok((model, adam))
}

fn adam_from_container(container: &Container) -> AdamState {
    AdamState {
        m: moment_tensors(container, "opt.m."),
        v: moment_tensors(container, "opt.v."),
        step: container
            .header_get("step")
            .and_then(|v| v.parse().ok())
            .unwrap_or(0),
    }
}
