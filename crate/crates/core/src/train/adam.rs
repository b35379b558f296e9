//! Adam with bias correction. Moments are kept per parameter name so they
//! survive checkpointing; the inner update runs in f64 and rounds back to
//! the parameter precision.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::TrainConfig;

#[derive(Clone, Debug, Default)]
pub struct AdamState {
    pub m: HashMap<String, Vec<f32>>,
    pub v: HashMap<String, Vec<f32>>,
    /// Completed update count; bias correction uses step + 1 during a step.
    pub step: u64,
}

impl AdamState {
    pub fn new() -> Self {
        AdamState::default()
    }

    /// One parameter update. `t` is the 1-based step for bias correction.
    pub fn update(
        &mut self,
        name: &str,
        param: &mut Tensor<f32>,
        grad: &[f32],
        lr: f64,
        t: u64,
        cfg: &TrainConfig,
    ) -> Result<()> {
        if let Some(bad) = grad.iter().find(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("gradient for {name} ({bad})"),
                step: t,
            });
        }
        let n = param.numel();
        let m = self
            .m
            .entry(name.to_string())
            .or_insert_with(|| vec![0.0; n]);
        let v = self
            .v
            .entry(name.to_string())
            .or_insert_with(|| vec![0.0; n]);
        let (b1, b2, eps) = (cfg.beta1, cfg.beta2, cfg.eps_adam);
        let bc1 = 1.0 - b1.powi(t as i32);
        let bc2 = 1.0 - b2.powi(t as i32);

        let mut data = param.data().to_vec();
        for i in 0..n {
            let g = grad[i] as f64;
            let mi = b1 * m[i] as f64 + (1.0 - b1) * g;
            let vi = b2 * v[i] as f64 + (1.0 - b2) * g * g;
            m[i] = mi as f32;
            v[i] = vi as f32;
            let m_hat = mi / bc1;
            let v_hat = vi / bc2;
            data[i] = (data[i] as f64 - lr * m_hat / (v_hat.sqrt() + eps)) as f32;
        }
        *param = Tensor::from_vec(param.shape(), data)?.requires_grad(true);
        Ok(())
    }
}
