//! The three loss terms and their weighted sum, built from taped ops so the
//! gradient flows end-to-end through both the forward and the inverse pass.

use crate::error::Result;
use crate::model::{IrrmModel, LatentPyramid};
use crate::tensor::{Element, Tensor};

/// Reconstruction loss: mean absolute difference (L1), per element.
pub fn loss_back<T: Element>(x_back: &Tensor<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(x_back.sub(x)?.abs().mean())
}

/// LR guidance loss: mean squared difference (L2), per element.
pub fn loss_forw<T: Element>(y_forw: &Tensor<T>, y_gt: &Tensor<T>) -> Result<Tensor<T>> {
    let d = y_forw.sub(y_gt)?;
    Ok(d.mul(&d)?.mean())
}

/// Latent regularizer: mean of squared entries across all pyramid levels,
/// pulling the forward latents toward a unit Gaussian.
pub fn loss_latent<T: Element>(z: &LatentPyramid<T>) -> Result<Tensor<T>> {
    let total = z.numel();
    if total == 0 {
        return Ok(Tensor::scalar(0.0));
    }
    let mut acc: Option<Tensor<T>> = None;
    for level in &z.levels {
        let s = level.mul(level)?.sum();
        acc = Some(match acc {
            Some(a) => a.add(&s)?,
            None => s,
        });
    }
    Ok(acc
        .expect("at least one level")
        .mul_scalar(1.0 / total as f64))
}

pub struct LossTerms<T: Element = f32> {
    pub total: Tensor<T>,
    pub back: Tensor<T>,
    pub forw: Tensor<T>,
    pub latent: Tensor<T>,
}

/// Full objective: downscale x, reconstruct from the freshly sampled
/// latents, and combine
/// `lambda1 * L_back + lambda2 * L_forw + lambda3 * L_latent`.
///
/// The reconstruction uses `z_sample` (drawn from the prior, as at test
/// time), not the forward latents; the forward latents enter only the
/// regularizer.
pub fn total_loss<T: Element>(
    model: &IrrmModel<T>,
    x: &Tensor<T>,
    y_gt: &Tensor<T>,
    z_sample: &LatentPyramid<T>,
    lambdas: (f64, f64, f64),
) -> Result<LossTerms<T>> {
    let (y_forw, z_forw) = model.forward(x)?;
    let x_back = model.inverse(&y_forw, z_sample)?;
    let back = loss_back(&x_back, x)?;
    let forw = loss_forw(&y_forw, y_gt)?;
    let latent = loss_latent(&z_forw)?;
    let total = back
        .mul_scalar(lambdas.0)
        .add(&forw.mul_scalar(lambdas.1))?
        .add(&latent.mul_scalar(lambdas.2))?;
    Ok(LossTerms {
        total,
        back,
        forw,
        latent,
    })
}
