//! PSNR and SSIM on the luma plane, f64 throughout.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::image::{to_luma, ImageU8};

/// PSNR in dB against a peak of 255. Identical inputs are reported as the
/// distinguished infinite value, never as a number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Psnr {
    Infinite,
    Db(f64),
}

impl Psnr {
    pub fn db(self) -> Option<f64> {
        match self {
            Psnr::Infinite => None,
            Psnr::Db(v) => Some(v),
        }
    }

    /// dB value with infinity mapped to f64::INFINITY, for comparisons.
    pub fn db_or_inf(self) -> f64 {
        match self {
            Psnr::Infinite => f64::INFINITY,
            Psnr::Db(v) => v,
        }
    }
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Infinite => f.write_str("inf"),
            Psnr::Db(v) => write!(f, "{v:.4}"),
        }
    }
}

/// PSNR between two planes of values on the [0, 255] scale (any matching
/// shape), after cropping `crop_border` pixels from every spatial edge.
pub fn psnr_plane(a: &Tensor<f64>, b: &Tensor<f64>, crop_border: usize) -> Result<Psnr> {
    let s = a.shape();
    if s != b.shape() {
        return Err(Error::ShapeMismatch {
            op: "psnr",
            lhs: s,
            rhs: b.shape(),
        });
    }
    if s.h <= 2 * crop_border || s.w <= 2 * crop_border {
        return Err(Error::invalid(
            "psnr",
            format!("crop border {crop_border} leaves no pixels of {s}"),
        ));
    }
    let (h, w) = (s.h, s.w);
    let mut sum = 0.0;
    let mut count = 0usize;
    for plane in 0..s.n * s.c {
        let pa = &a.data()[plane * h * w..][..h * w];
        let pb = &b.data()[plane * h * w..][..h * w];
        for r in crop_border..h - crop_border {
            for c in crop_border..w - crop_border {
                let d = pa[r * w + c] - pb[r * w + c];
                sum += d * d;
                count += 1;
            }
        }
    }
    let mse = sum / count as f64;
    if mse == 0.0 {
        Ok(Psnr::Infinite)
    } else {
        Ok(Psnr::Db(10.0 * (255.0 * 255.0 / mse).log10()))
    }
}

/// PSNR on the BT.601 luma channel of two images.
pub fn psnr_y(a: &ImageU8, b: &ImageU8, crop_border: usize) -> Result<Psnr> {
    psnr_plane(&to_luma(a), &to_luma(b), crop_border)
}

fn gaussian_window() -> [f64; 11] {
    let sigma = 1.5f64;
    let mut w = [0.0; 11];
    let mut sum = 0.0;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - 5.0;
        *v = (-d * d / (2.0 * sigma * sigma)).exp();
        sum += *v;
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Mean local SSIM over valid 11x11 windows, Gaussian weighted (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 255. Inputs are planes on [0, 255].
pub fn ssim_plane(a: &Tensor<f64>, b: &Tensor<f64>) -> Result<f64> {
    let s = a.shape();
    if s != b.shape() {
        return Err(Error::ShapeMismatch {
            op: "ssim",
            lhs: s,
            rhs: b.shape(),
        });
    }
    if s.h < 11 || s.w < 11 {
        return Err(Error::invalid(
            "ssim",
            format!("{s} is smaller than the 11x11 window"),
        ));
    }
    let win = gaussian_window();
    let (h, w) = (s.h, s.w);
    let (vh, vw) = (h - 10, w - 10); // valid output dims
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);

    // separable Gaussian filter, horizontal then vertical, valid region only
    let filter = |src: &[f64]| -> Vec<f64> {
        let mut tmp = vec![0.0; h * vw];
        for r in 0..h {
            for c in 0..vw {
                let mut acc = 0.0;
                for (k, wk) in win.iter().enumerate() {
                    acc += wk * src[r * w + c + k];
                }
                tmp[r * vw + c] = acc;
            }
        }
        let mut out = vec![0.0; vh * vw];
        for r in 0..vh {
            for c in 0..vw {
                let mut acc = 0.0;
                for (k, wk) in win.iter().enumerate() {
                    acc += wk * tmp[(r + k) * vw + c];
                }
                out[r * vw + c] = acc;
            }
        }
        out
    };

    let mut total = 0.0;
    let mut count = 0usize;
    for plane in 0..s.n * s.c {
        let pa = &a.data()[plane * h * w..][..h * w];
        let pb = &b.data()[plane * h * w..][..h * w];
        let sq_a: Vec<f64> = pa.iter().map(|v| v * v).collect();
        let sq_b: Vec<f64> = pb.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| x * y).collect();

        let mu_a = filter(pa);
        let mu_b = filter(pb);
        let m_aa = filter(&sq_a);
        let m_bb = filter(&sq_b);
        let m_ab = filter(&ab);

        for i in 0..vh * vw {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = m_aa[i] - ma * ma;
            let var_b = m_bb[i] - mb * mb;
            let cov = m_ab[i] - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// SSIM on the BT.601 luma channel of two images.
pub fn ssim_y(a: &ImageU8, b: &ImageU8) -> Result<f64> {
    ssim_plane(&to_luma(a), &to_luma(b))
}
