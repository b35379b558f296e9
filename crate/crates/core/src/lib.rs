//! Invertible residual rescaling models.
//!
//! An IRRM is an exactly invertible mapping between a high-resolution image
//! and a (low-resolution image, latent high-frequency pyramid) pair. The
//! forward direction downscales; the inverse direction reconstructs the
//! original image exactly when given the true latents, or a plausible one
//! when the latents are sampled from a Gaussian.
//!
//! The crate is self-contained: a small 4-D tensor type with reverse-mode
//! differentiation, the orthonormal Haar decomposition and its residual
//! variant, the coupling-block model itself, a deterministic trainer, and
//! the PSNR/SSIM/bicubic machinery needed to evaluate rescaling quality.

pub mod error;
pub mod gradcheck;
pub mod metrics_io;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod wavelet;

pub use error::{Error, Result};
pub use tensor::{Element, Gradients, Recording, Shape, Tensor};
