//! Interactive browser demo of invertible rescaling.
//!
//! Three operations on an image loaded from a canvas:
//!   - wavelet view: the bypassed low-resolution base and the three residual
//!     high-frequency bands;
//!   - round trip: downscale, then upscale with latents sampled at a chosen
//!     sigma, reporting luma PSNR against the source;
//!   - training: run optimizer steps on the image in the browser and watch
//!     the round trip improve.

use wasm_bindgen::prelude::*;

use irrm_core::metrics_io::{psnr_y, ImageU8};
use irrm_core::model::{IrrmModel, ModelConfig};
use irrm_core::train::{Dataset, TrainConfig, Trainer};
use irrm_core::wavelet;
use irrm_core::{Shape, Tensor};

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// RGBA pixel buffer for `ImageData`.
#[wasm_bindgen]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

#[wasm_bindgen]
impl Frame {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[wasm_bindgen(getter)]
    pub fn pixels(&self) -> Vec<u8> {
        self.pixels.clone()
    }
}

fn tensor_to_frame(t: &Tensor<f32>, offset: f32, gain: f32) -> Frame {
    let s = t.shape();
    let plane = s.h * s.w;
    let mut pixels = vec![255u8; plane * 4];
    for i in 0..plane {
        for c in 0..3 {
            let v = (t.data()[c * plane + i] * gain + offset).clamp(0.0, 1.0);
            pixels[i * 4 + c] = (v * 255.0).round() as u8;
        }
    }
    Frame {
        width: s.w as u32,
        height: s.h as u32,
        pixels,
    }
}

fn tensor_to_image(t: &Tensor<f32>) -> ImageU8 {
    let s = t.shape();
    let plane = s.h * s.w;
    let mut data = vec![0u8; plane * 3];
    for i in 0..plane {
        for c in 0..3 {
            data[i * 3 + c] = (t.data()[c * plane + i].clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    ImageU8::new(s.w, s.h, data).expect("consistent dims")
}

fn rgba_to_tensor(width: usize, height: usize, rgba: &[u8]) -> Tensor<f32> {
    let plane = width * height;
    let mut data = vec![0.0f32; 3 * plane];
    for i in 0..plane {
        for c in 0..3 {
            data[c * plane + i] = rgba[i * 4 + c] as f32 / 255.0;
        }
    }
    Tensor::from_vec(Shape::new(1, 3, height, width), data).expect("consistent dims")
}

#[wasm_bindgen]
pub struct Demo {
    trainer: Trainer,
    image: Tensor<f32>,
    orig_w: usize,
    orig_h: usize,
    last_psnr: f64,
}

#[wasm_bindgen]
impl Demo {
    /// Build a small x2 model around the given RGBA image.
    #[wasm_bindgen(constructor)]
    pub fn new(width: u32, height: u32, rgba: &[u8], seed: u32) -> Result<Demo, JsValue> {
        let (w, h) = (width as usize, height as usize);
        if rgba.len() != w * h * 4 {
            return Err(js_err("rgba buffer does not match the given dimensions"));
        }
        if w < 16 || h < 16 {
            return Err(js_err("image must be at least 16x16"));
        }
        let raw = rgba_to_tensor(w, h, rgba);
        let image = raw.reflect_pad_to_multiple(2);
        let trainer = Self::fresh_trainer(&image, seed)?;
        Ok(Demo {
            trainer,
            image,
            orig_w: w,
            orig_h: h,
            last_psnr: f64::NAN,
        })
    }

    fn fresh_trainer(image: &Tensor<f32>, seed: u32) -> Result<Trainer, JsValue> {
        let cfg = ModelConfig {
            irbs_per_rdm: 2,
            hidden: 16,
            ..ModelConfig::preset_s(2)
        };
        let model = IrrmModel::init(cfg, seed as u64).map_err(js_err)?;
        let s = image.shape();
        let patch = s.h.min(s.w).min(48) / 2 * 2;
        let train_cfg = TrainConfig {
            patch,
            batch: 2,
            seed: seed as u64,
            total_steps: u64::MAX,
            checkpoint_every: 0,
            ..TrainConfig::default()
        };
        Trainer::new(model, Dataset::new(vec![image.clone()]), train_cfg).map_err(js_err)
    }

    /// Reinitialize the model, keeping the image.
    pub fn reset(&mut self, seed: u32) -> Result<(), JsValue> {
        self.trainer = Self::fresh_trainer(&self.image, seed)?;
        Ok(())
    }

    pub fn param_count(&self) -> u32 {
        self.trainer.model().count_params() as u32
    }

    pub fn steps_done(&self) -> u32 {
        self.trainer.completed_steps() as u32
    }

    /// Wavelet view. band 0: low-resolution base; 1/2/3: the LH/HL/HH
    /// residual bands, amplified and centered at gray.
    pub fn band_view(&self, band: u8) -> Result<Frame, JsValue> {
        let (base, high) = wavelet::residual_decompose(&self.image).map_err(js_err)?;
        Ok(match band {
            0 => tensor_to_frame(&base, 0.0, 1.0),
            b @ 1..=3 => {
                let c = self.image.shape().c;
                let from = (b as usize - 1) * c;
                let slice = high.slice_channels(from, from + c).map_err(js_err)?;
                tensor_to_frame(&slice, 0.5, 2.0)
            }
            _ => return Err(js_err("band must be 0..=3")),
        })
    }

    /// The model's current downscale of the image.
    pub fn lr_view(&self) -> Result<Frame, JsValue> {
        let (y, _) = self.trainer.model().forward(&self.image).map_err(js_err)?;
        Ok(tensor_to_frame(&y, 0.0, 1.0))
    }

    /// Downscale then upscale with latents sampled at `sigma`.
    /// Returns the reconstruction; query the PSNR with [`Demo::last_psnr`].
    pub fn roundtrip(&mut self, sigma: f32, seed: u32) -> Result<Frame, JsValue> {
        let model = self.trainer.model();
        let s = self.image.shape();
        let (y, _) = model.forward(&self.image).map_err(js_err)?;
        let z = model
            .sample_latents(1, s.h, s.w, sigma as f64, seed as u64)
            .map_err(js_err)?;
        let x_hat = model.inverse(&y, &z).map_err(js_err)?;
        let x_hat = x_hat.crop_spatial(self.orig_h, self.orig_w);

        let orig = tensor_to_image(&self.image.crop_spatial(self.orig_h, self.orig_w));
        let recon = tensor_to_image(&x_hat);
        self.last_psnr = psnr_y(&orig, &recon, 2)
            .map(|p| p.db_or_inf())
            .unwrap_or(f64::NAN);
        Ok(tensor_to_frame(&x_hat, 0.0, 1.0))
    }

    /// Luma PSNR (dB) of the most recent round trip; infinite round trips
    /// report a large sentinel.
    pub fn last_psnr(&self) -> f64 {
        self.last_psnr
    }

    /// Run `n` optimizer steps on the loaded image; returns the per-step
    /// total loss.
    pub fn train_steps(&mut self, n: u32) -> Result<Vec<f64>, JsValue> {
        let mut losses = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let record = self.trainer.step().map_err(js_err)?;
            losses.push(record.total);
        }
        Ok(losses)
    }

    /// Reconstruction with zero latents next to the bicubic-style baseline
    /// (nearest upsample of the model LR), for visual comparison.
    pub fn zero_latent_roundtrip(&mut self) -> Result<Frame, JsValue> {
        self.roundtrip(0.0, 0)
    }
}
