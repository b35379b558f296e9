//! Enhanced Block: the learnable conv subnetwork inside each coupling block.
//!
//! All variants are conv(3x3) -> body -> conv(3x3) with the same spatial
//! size. The final conv is zero-initialized by default so a fresh block
//! outputs exactly zero, which makes the whole flow the identity at
//! initialization.
//!
//! Variants differ only in the body wiring, never in the conv shapes:
//!   - Pcb: plain activation.
//!   - Rb: identity skip over the activation, `h + act(h)`. An input-to-output
//!     skip is shape-incompatible here (in/out channels differ inside the
//!     coupling), so the skip wraps the nonlinearity instead; parameter count
//!     is identical to Pcb.
//!   - RbPlus: hidden width halved, and only half of the hidden channels pass
//!     through the activation (split/concat); weight count is exactly half
//!     of Rb at the same nominal width.

use std::fmt;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Element, Shape, Tensor};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EbKind {
    Pcb,
    Rb,
    RbPlus,
}

impl fmt::Display for EbKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EbKind::Pcb => "pcb",
            EbKind::Rb => "rb",
            EbKind::RbPlus => "rb_plus",
        })
    }
}

impl std::str::FromStr for EbKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pcb" => Ok(EbKind::Pcb),
            "rb" => Ok(EbKind::Rb),
            "rb_plus" | "rbplus" | "rb+" => Ok(EbKind::RbPlus),
            other => Err(format!("unknown eb_kind `{other}` (pcb, rb, rb_plus)")),
        }
    }
}

/// Initialization of a block's final conv.
#[derive(Clone, Copy, Debug)]
pub enum FinalInit {
    /// Identically zero: the block outputs zero, the flow starts as the
    /// identity map.
    Zero,
    /// Fan-in-scaled normal, `gain * sqrt(2 / fan_in)`.
    Random { gain: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct EbConfig {
    pub kind: EbKind,
    pub in_channels: usize,
    pub hidden_channels: usize,
    pub out_channels: usize,
    pub slope: f64,
}

impl EbConfig {
    /// Hidden width actually instantiated (halved for RbPlus).
    pub fn effective_hidden(&self) -> usize {
        match self.kind {
            EbKind::RbPlus => (self.hidden_channels / 2).max(2),
            _ => self.hidden_channels,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnhancedBlock<T: Element = f32> {
    cfg: EbConfig,
    conv1_w: Tensor<T>,
    conv1_b: Tensor<T>,
    conv2_w: Tensor<T>,
    conv2_b: Tensor<T>,
}

fn he_std(fan_in: usize) -> f64 {
    (2.0 / fan_in as f64).sqrt()
}

impl EnhancedBlock<f32> {
    /// Build a block. The final conv either starts at exactly zero (the
    /// bypass/identity initialization) or at a small fan-in-scaled random
    /// value whose gain the coupling layer chooses for its own conditioning.
    pub fn init(cfg: EbConfig, final_init: FinalInit, rng: &mut Rng) -> Self {
        let hidden = cfg.effective_hidden();
        let w1s = Shape::new(hidden, cfg.in_channels, 3, 3);
        let w2s = Shape::new(cfg.out_channels, hidden, 3, 3);
        let conv1_w = Tensor::randn(w1s, he_std(cfg.in_channels * 9), rng).requires_grad(true);
        let conv2_w = match final_init {
            FinalInit::Zero => Tensor::zeros(w2s),
            FinalInit::Random { gain } => Tensor::randn(w2s, gain * he_std(hidden * 9), rng),
        }
        .requires_grad(true);
        EnhancedBlock {
            cfg,
            conv1_w,
            conv1_b: Tensor::zeros(Shape::new(1, hidden, 1, 1)).requires_grad(true),
            conv2_w,
            conv2_b: Tensor::zeros(Shape::new(1, cfg.out_channels, 1, 1)).requires_grad(true),
        }
    }
}

impl<T: Element> EnhancedBlock<T> {
    pub fn config(&self) -> &EbConfig {
        &self.cfg
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.shape().c != self.cfg.in_channels {
            return Err(Error::invalid(
                "eb_forward",
                format!(
                    "input has {} channels, block expects {}",
                    x.shape().c,
                    self.cfg.in_channels
                ),
            ));
        }
        let h = x.conv2d(&self.conv1_w, &self.conv1_b, 1, 1)?;
        let t = match self.cfg.kind {
            EbKind::Pcb => h.leaky_relu(self.cfg.slope),
            EbKind::Rb => h.add(&h.leaky_relu(self.cfg.slope))?,
            EbKind::RbPlus => {
                let eff = h.shape().c;
                let q1 = h.slice_channels(0, eff / 2)?;
                let q2 = h.slice_channels(eff / 2, eff)?;
                let q2r = q2.add(&q2.leaky_relu(self.cfg.slope))?;
                Tensor::concat_channels(&[&q1, &q2r])?
            }
        };
        t.conv2d(&self.conv2_w, &self.conv2_b, 1, 1)
    }

    pub fn params(&self) -> [(&'static str, &Tensor<T>); 4] {
        [
            ("conv1.weight", &self.conv1_w),
            ("conv1.bias", &self.conv1_b),
            ("conv2.weight", &self.conv2_w),
            ("conv2.bias", &self.conv2_b),
        ]
    }

    pub fn params_mut(&mut self) -> [(&'static str, &mut Tensor<T>); 4] {
        [
            ("conv1.weight", &mut self.conv1_w),
            ("conv1.bias", &mut self.conv1_b),
            ("conv2.weight", &mut self.conv2_w),
            ("conv2.bias", &mut self.conv2_b),
        ]
    }

    pub fn count_params(&self) -> usize {
        self.params().iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn cast<U: Element>(&self) -> EnhancedBlock<U> {
        EnhancedBlock {
            cfg: self.cfg,
            conv1_w: self.conv1_w.cast().requires_grad(true),
            conv1_b: self.conv1_b.cast().requires_grad(true),
            conv2_w: self.conv2_w.cast().requires_grad(true),
            conv2_b: self.conv2_b.cast().requires_grad(true),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: EbKind, in_c: usize, hidden: usize, out_c: usize) -> EbConfig {
        EbConfig {
            kind,
            in_channels: in_c,
            hidden_channels: hidden,
            out_channels: out_c,
            slope: 0.2,
        }
    }

    #[test]
    fn zero_init_outputs_zero_for_every_kind() {
        let mut rng = Rng::seeded(1);
        let x = Tensor::randn(Shape::new(2, 9, 8, 8), 1.0, &mut rng);
        for kind in [EbKind::Pcb, EbKind::Rb, EbKind::RbPlus] {
            let eb = EnhancedBlock::init(cfg(kind, 9, 16, 3), FinalInit::Zero, &mut rng);
            let y = eb.forward(&x).unwrap();
            assert!(
                y.data().iter().all(|&v| v == 0.0),
                "{kind} not zero at init"
            );
        }
    }

    #[test]
    fn conv_parameter_arithmetic() {
        // 3x3 conv, 4 in, 8 out, with bias: 4*8*9 + 8 = 296
        let w = Shape::new(8, 4, 3, 3);
        assert_eq!(w.numel() + 8, 296);
        let mut rng = Rng::seeded(11);
        let eb = EnhancedBlock::init(cfg(EbKind::Pcb, 4, 8, 5), FinalInit::Zero, &mut rng);
        // conv1: 4*8*9 + 8, conv2: 8*5*9 + 5
        assert_eq!(eb.count_params(), 296 + 8 * 5 * 9 + 5);
    }

    #[test]
    fn pcb_and_rb_have_identical_param_counts() {
        let mut rng = Rng::seeded(2);
        let pcb = EnhancedBlock::init(cfg(EbKind::Pcb, 12, 32, 12), FinalInit::Zero, &mut rng);
        let rb = EnhancedBlock::init(cfg(EbKind::Rb, 12, 32, 12), FinalInit::Zero, &mut rng);
        assert_eq!(pcb.count_params(), rb.count_params());
    }

    #[test]
    fn rb_plus_halves_the_weights() {
        let mut rng = Rng::seeded(3);
        let rb = EnhancedBlock::init(cfg(EbKind::Rb, 12, 32, 12), FinalInit::Zero, &mut rng);
        let rbp = EnhancedBlock::init(cfg(EbKind::RbPlus, 12, 32, 12), FinalInit::Zero, &mut rng);
        let weights = |eb: &EnhancedBlock<f32>| {
            eb.params()
                .iter()
                .filter(|(n, _)| n.ends_with("weight"))
                .map(|(_, t)| t.numel())
                .sum::<usize>()
        };
        assert_eq!(weights(&rbp) * 2, weights(&rb));
    }

    #[test]
    fn rb_skip_path_is_observable() {
        // conv1 = identity kernel, conv2 = identity 1x1: Rb gives x + act(x),
        // Pcb gives act(x) alone.
        let mut rng = Rng::seeded(4);
        let mut rb = EnhancedBlock::init(cfg(EbKind::Rb, 2, 2, 2), FinalInit::Zero, &mut rng);
        let mut pcb = EnhancedBlock::init(cfg(EbKind::Pcb, 2, 2, 2), FinalInit::Zero, &mut rng);
        for eb in [&mut rb, &mut pcb] {
            // channel-preserving delta kernels: center tap of (ch, ch)
            let mut w1 = vec![0.0f32; 2 * 2 * 9];
            let mut w2 = vec![0.0f32; 2 * 2 * 9];
            for ch in 0..2 {
                w1[(ch * 2 + ch) * 9 + 4] = 1.0;
                w2[(ch * 2 + ch) * 9 + 4] = 1.0;
            }
            let [_, _, (_, c2w), _] = eb.params_mut();
            *c2w = Tensor::from_vec(Shape::new(2, 2, 3, 3), w2)
                .unwrap()
                .requires_grad(true);
            let [(_, c1w), _, _, _] = eb.params_mut();
            *c1w = Tensor::from_vec(Shape::new(2, 2, 3, 3), w1)
                .unwrap()
                .requires_grad(true);
        }
        let x = Tensor::from_vec(Shape::new(1, 2, 1, 1), vec![-1.0f32, 2.0]).unwrap();
        let y_rb = rb.forward(&x).unwrap();
        let y_pcb = pcb.forward(&x).unwrap();
        // act(-1) = -0.2, act(2) = 2
        assert_eq!(y_pcb.data(), &[-0.2, 2.0]);
        assert_eq!(y_rb.data(), &[-1.2, 4.0]);
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let mut rng = Rng::seeded(5);
        let eb = EnhancedBlock::init(cfg(EbKind::Rb, 4, 8, 2), FinalInit::Zero, &mut rng);
        let x = Tensor::<f32>::zeros(Shape::new(1, 3, 4, 4));
        assert!(eb.forward(&x).is_err());
    }
}
