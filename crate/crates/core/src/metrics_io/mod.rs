//! Image file handling, color conversion, bicubic resampling, and quality
//! metrics (PSNR and SSIM on the luma channel). Metric math runs in f64
//! regardless of model precision; these functions double as test oracles.

mod bicubic;
mod image;
mod quality;

pub use bicubic::{bicubic_resize, cubic_kernel};
pub use image::{from_tensor, load_png, save_png, to_luma, to_tensor, ImageU8};
pub use quality::{psnr_plane, psnr_y, ssim_plane, ssim_y, Psnr};
