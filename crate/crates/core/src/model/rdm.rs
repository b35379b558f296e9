//! Residual Downscaling Module: one 2x scale stage.
//!
//! The stage splits its input into the bypassed low-resolution base and the
//! residual high bands, then runs the coupling stack. The low branch enters
//! as the base itself, so with zero-initialized blocks the stage downscales
//! by plain 2x2 averaging and emits the residual high bands unchanged.
//!
//! The long-skip ablation does not change this decomposition (the residual's
//! high bands coincide with the input's own high bands, value for value); it
//! only switches the blocks from zero to small random initialization, which
//! is decided at model construction.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Element, Tensor};
use crate::wavelet::{residual_decompose, residual_recompose};

use super::irb::Irb;
use super::ModelConfig;

#[derive(Clone, Debug)]
pub struct Rdm<T: Element = f32> {
    irbs: Vec<Irb<T>>,
}

impl Rdm<f32> {
    pub fn init(cfg: &ModelConfig, rng: &mut Rng) -> Self {
        let irbs = (0..cfg.irbs_per_rdm)
            .map(|_| {
                Irb::init(
                    cfg.channels,
                    cfg.hidden,
                    cfg.eb_kind,
                    cfg.coupling,
                    cfg.clamp_alpha,
                    cfg.slope,
                    cfg.long_skip,
                    rng,
                )
            })
            .collect();
        Rdm { irbs }
    }
}

impl<T: Element> Rdm<T> {
    /// Downscale by 2x: returns (y, z_level) with y carrying C channels at
    /// half resolution and z_level the 3C high-frequency channels.
    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let (mut u2, mut u1) = residual_decompose(x)?;
        for irb in &self.irbs {
            (u1, u2) = irb.forward(&u1, &u2)?;
        }
        Ok((u2, u1))
    }

    pub fn inverse(&self, y: &Tensor<T>, z_level: &Tensor<T>) -> Result<Tensor<T>> {
        let ys = y.shape();
        let zs = z_level.shape();
        if zs.c != 3 * ys.c || (zs.n, zs.h, zs.w) != (ys.n, ys.h, ys.w) {
            return Err(Error::ShapeMismatch {
                op: "rdm_inverse",
                lhs: ys,
                rhs: zs,
            });
        }
        let mut u1 = z_level.clone();
        let mut u2 = y.clone();
        for irb in self.irbs.iter().rev() {
            (u1, u2) = irb.inverse(&u1, &u2)?;
        }
        residual_recompose(&u2, &u1)
    }

    pub fn irbs(&self) -> &[Irb<T>] {
        &self.irbs
    }

    pub fn irbs_mut(&mut self) -> &mut [Irb<T>] {
        &mut self.irbs
    }

    pub fn cast<U: Element>(&self) -> Rdm<U> {
        Rdm {
            irbs: self.irbs.iter().map(|b| b.cast()).collect(),
        }
    }
}
