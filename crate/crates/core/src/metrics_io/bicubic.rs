//! Separable bicubic resampling with the Keys (a = -0.5) kernel.
//!
//! Downscaling is antialiased: the kernel support is widened by the inverse
//! scale. Edges use clamped coordinates and every tap row is normalized to
//! sum to one, so constant images are preserved exactly.

use crate::error::{Error, Result};
use crate::tensor::{Element, Shape, Tensor};

/// Keys cubic convolution kernel, a = -0.5. Support is |x| < 2;
/// `cubic_kernel(0.5) = 0.5625`, `cubic_kernel(1.5) = -0.0625`.
pub fn cubic_kernel(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        (A + 2.0) * x * x * x - (A + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        A * (x * x * x - 5.0 * x * x + 8.0 * x - 4.0)
    } else {
        0.0
    }
}

struct AxisTaps {
    /// Per output index: (first source index, weights).
    rows: Vec<(usize, Vec<f64>)>,
}

fn axis_taps(in_len: usize, out_len: usize, scale: f64) -> AxisTaps {
    // Antialias when downscaling: stretch the kernel by 1/scale.
    let width = (1.0 / scale).max(1.0);
    let support = 2.0 * width;
    let mut rows = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let center = (i as f64 + 0.5) / scale - 0.5;
        let lo = (center - support).ceil() as isize;
        let hi = (center + support).floor() as isize;
        let first = lo.clamp(0, in_len as isize - 1) as usize;
        let last = hi.clamp(0, in_len as isize - 1) as usize;
        let mut weights = vec![0.0; last - first + 1];
        let mut sum = 0.0;
        for j in lo..=hi {
            let w = cubic_kernel((j as f64 - center) / width) / width;
            // clamped coordinates: out-of-range taps accumulate on the edge
            let idx = j.clamp(0, in_len as isize - 1) as usize;
            weights[idx - first] += w;
            sum += w;
        }
        if sum != 0.0 {
            for w in &mut weights {
                *w /= sum;
            }
        }
        rows.push((first, weights));
    }
    AxisTaps { rows }
}

/// Resample by `scale`, one of 1/4, 1/2, 2, 4. Accumulation runs in f64.
pub fn bicubic_resize<T: Element>(x: &Tensor<T>, scale: f64) -> Result<Tensor<T>> {
    if ![0.25, 0.5, 2.0, 4.0].contains(&scale) {
        return Err(Error::invalid(
            "bicubic_resize",
            format!("unsupported scale {scale} (use 1/4, 1/2, 2 or 4)"),
        ));
    }
    let s = x.shape();
    let out_h = ((s.h as f64 * scale).round() as usize).max(1);
    let out_w = ((s.w as f64 * scale).round() as usize).max(1);
    let h_taps = axis_taps(s.w, out_w, scale);
    let v_taps = axis_taps(s.h, out_h, scale);

    let mut out = vec![T::ZERO; s.n * s.c * out_h * out_w];
    let mut tmp = vec![0.0f64; s.h * out_w];
    for plane in 0..s.n * s.c {
        let src = &x.data()[plane * s.h * s.w..][..s.h * s.w];
        // horizontal pass
        for r in 0..s.h {
            let row = &src[r * s.w..][..s.w];
            let trow = &mut tmp[r * out_w..][..out_w];
            for (o, (first, weights)) in h_taps.rows.iter().enumerate() {
                let mut acc = 0.0;
                for (k, w) in weights.iter().enumerate() {
                    acc += w * row[first + k].to_f64();
                }
                trow[o] = acc;
            }
        }
        // vertical pass
        let dst = &mut out[plane * out_h * out_w..][..out_h * out_w];
        for (o, (first, weights)) in v_taps.rows.iter().enumerate() {
            let drow = &mut dst[o * out_w..][..out_w];
            for c in 0..out_w {
                let mut acc = 0.0;
                for (k, w) in weights.iter().enumerate() {
                    acc += w * tmp[(first + k) * out_w + c];
                }
                drow[c] = T::from_f64(acc);
            }
        }
    }
    Tensor::from_vec(Shape::new(s.n, s.c, out_h, out_w), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn kernel_closed_form_taps() {
        // half-integer taps of the a = -0.5 cubic
        assert_eq!(cubic_kernel(0.5), 0.5625);
        assert_eq!(cubic_kernel(-0.5), 0.5625);
        assert_eq!(cubic_kernel(1.5), -0.0625);
        assert_eq!(cubic_kernel(-1.5), -0.0625);
        assert_eq!(cubic_kernel(0.0), 1.0);
        assert_eq!(cubic_kernel(1.0), 0.0);
        assert_eq!(cubic_kernel(2.0), 0.0);
    }

    #[test]
    fn constant_image_is_preserved_exactly() {
        let x = Tensor::<f64>::full(Shape::new(1, 3, 8, 12), 0.37);
        for scale in [0.25, 0.5, 2.0, 4.0] {
            let y = bicubic_resize(&x, scale).unwrap();
            for &v in y.data() {
                assert!((v - 0.37).abs() < 1e-12, "scale {scale}");
            }
        }
    }

    #[test]
    fn upscale_impulse_matches_direct_kernel_evaluation() {
        // 2x upscale of a centered impulse: output o samples the kernel at
        // (o + 0.5)/2 - 0.5 relative to the impulse position.
        let mut data = vec![0.0f64; 16];
        data[8] = 1.0;
        let x = Tensor::from_vec(Shape::new(1, 1, 1, 16), data).unwrap();
        let y = bicubic_resize(&x, 2.0).unwrap();
        for (o, &v) in y.data().iter().enumerate() {
            let center = (o as f64 + 0.5) / 2.0 - 0.5;
            let expected = cubic_kernel(center - 8.0);
            // interior taps only; edge rows are renormalized
            if (2.0..30.0).contains(&(o as f64)) {
                assert!((v - expected).abs() < 1e-12, "at {o}: {v} vs {expected}");
            }
        }
    }

    #[test]
    fn downscale_matches_independent_2d_resampler() {
        // oracle: direct (non-separable) evaluation with the same kernel,
        // antialias widening, clamped edges and product weights
        let mut rng = Rng::seeded(77);
        let s = Shape::new(1, 1, 16, 16);
        let x =
            Tensor::<f64>::from_vec(s, (0..s.numel()).map(|_| rng.uniform()).collect()).unwrap();
        let y = bicubic_resize(&x, 0.5).unwrap();

        let width: f64 = 2.0;
        let support = 2.0 * width;
        let taps = |center: f64, len: usize| -> Vec<(usize, f64)> {
            let lo = (center - support).ceil() as isize;
            let hi = (center + support).floor() as isize;
            (lo..=hi)
                .map(|j| {
                    (
                        j.clamp(0, len as isize - 1) as usize,
                        cubic_kernel((j as f64 - center) / width) / width,
                    )
                })
                .collect()
        };
        for or in 0..8 {
            for oc in 0..8 {
                let rc = (or as f64 + 0.5) * 2.0 - 0.5;
                let cc = (oc as f64 + 0.5) * 2.0 - 0.5;
                let (mut acc, mut wsum) = (0.0, 0.0);
                for &(r, wr) in &taps(rc, 16) {
                    for &(c, wc) in &taps(cc, 16) {
                        acc += wr * wc * x.at(0, 0, r, c);
                        wsum += wr * wc;
                    }
                }
                let expected = acc / wsum;
                let got = y.at(0, 0, or, oc);
                assert!(
                    (got - expected).abs() < 1e-9,
                    "({or},{oc}): {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn mean_is_roughly_preserved() {
        let mut rng = Rng::seeded(5);
        let s = Shape::new(1, 3, 32, 32);
        let x =
            Tensor::<f64>::from_vec(s, (0..s.numel()).map(|_| rng.uniform()).collect()).unwrap();
        let mean = |t: &Tensor<f64>| t.data().iter().sum::<f64>() / t.numel() as f64;
        let m0 = mean(&x);
        for scale in [0.5, 2.0] {
            let m1 = mean(&bicubic_resize(&x, scale).unwrap());
            assert!((m1 - m0).abs() / m0 < 1e-3, "scale {scale}: {m0} vs {m1}");
        }
    }

    #[test]
    fn unsupported_scale_is_rejected() {
        let x = Tensor::<f32>::zeros(Shape::new(1, 1, 4, 4));
        assert!(bicubic_resize(&x, 3.0).is_err());
    }
}
