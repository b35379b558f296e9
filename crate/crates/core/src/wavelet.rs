//! Orthonormal 2-D Haar analysis/synthesis and the residual decomposition.
//!
//! Per 2x2 block with values a (top-left), b (top-right), c (bottom-left),
//! d (bottom-right):
//!
//!   LL = (a+b+c+d)/2   LH = (a-b+c-d)/2
//!   HL = (a+b-c-d)/2   HH = (a-b-c+d)/2
//!
//! The 1/2 scaling makes the transform orthonormal, so energy is conserved
//! and synthesis is the transpose. The residual decomposition splits an
//! image into a bypassed low-resolution base (2x2 average pooling, equal to
//! LL/2) and the high bands of the residual `x - nearest_up2(avg_pool2(x))`;
//! block-mean subtraction annihilates the LL functional, so those high bands
//! equal the high bands of `x` itself and the pair (base, high) is an
//! exactly invertible re-parameterization.
//!
//! Everything here is built from taped tensor ops, so both directions are
//! differentiable.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// One level of Haar analysis: `low` is the LL band (n, C, h/2, w/2), `high`
/// concatenates LH, HL, HH in that fixed channel order (n, 3C, h/2, w/2).
#[derive(Clone, Debug)]
pub struct WaveletBands<T: Element = f32> {
    pub low: Tensor<T>,
    pub high: Tensor<T>,
}

pub fn haar_forward<T: Element>(x: &Tensor<T>) -> Result<WaveletBands<T>> {
    let s = x.shape();
    if !s.h.is_multiple_of(2) || !s.w.is_multiple_of(2) {
        return Err(Error::OddSpatialDims {
            op: "haar_forward",
            shape: s,
        });
    }
    let a = x.subgrid2(0, 0)?;
    let b = x.subgrid2(0, 1)?;
    let c = x.subgrid2(1, 0)?;
    let d = x.subgrid2(1, 1)?;

    let low = a.add(&b)?.add(&c)?.add(&d)?.mul_scalar(0.5);
    let lh = a.sub(&b)?.add(&c)?.sub(&d)?.mul_scalar(0.5);
    let hl = a.add(&b)?.sub(&c)?.sub(&d)?.mul_scalar(0.5);
    let hh = a.sub(&b)?.sub(&c)?.add(&d)?.mul_scalar(0.5);
    let high = Tensor::concat_channels(&[&lh, &hl, &hh])?;
    Ok(WaveletBands { low, high })
}

pub fn haar_inverse<T: Element>(bands: &WaveletBands<T>) -> Result<Tensor<T>> {
    let ls = bands.low.shape();
    let hs = bands.high.shape();
    if hs.c != 3 * ls.c || (hs.n, hs.h, hs.w) != (ls.n, ls.h, ls.w) {
        return Err(Error::ShapeMismatch {
            op: "haar_inverse",
            lhs: ls,
            rhs: hs,
        });
    }
    let ll = &bands.low;
    let lh = bands.high.slice_channels(0, ls.c)?;
    let hl = bands.high.slice_channels(ls.c, 2 * ls.c)?;
    let hh = bands.high.slice_channels(2 * ls.c, 3 * ls.c)?;

    let a = ll.add(&lh)?.add(&hl)?.add(&hh)?.mul_scalar(0.5);
    let b = ll.sub(&lh)?.add(&hl)?.sub(&hh)?.mul_scalar(0.5);
    let c = ll.add(&lh)?.sub(&hl)?.sub(&hh)?.mul_scalar(0.5);
    let d = ll.sub(&lh)?.sub(&hl)?.add(&hh)?.mul_scalar(0.5);

    a.scatter2(0, 0)
        .add(&b.scatter2(0, 1))?
        .add(&c.scatter2(1, 0))?
        .add(&d.scatter2(1, 1))
}

/// Split into (base_lr, high): the bypassed low-resolution base and the high
/// bands of the residual.
pub fn residual_decompose<T: Element>(x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    let s = x.shape();
    if !s.h.is_multiple_of(2) || !s.w.is_multiple_of(2) {
        return Err(Error::OddSpatialDims {
            op: "residual_decompose",
            shape: s,
        });
    }
    let base = x.avg_pool2()?;
    let residual = x.sub(&base.nearest_up2())?;
    let bands = haar_forward(&residual)?;
    Ok((base, bands.high))
}

/// Exact inverse of [`residual_decompose`]: the base carries LL/2, so
/// synthesis runs with LL = 2 * base.
pub fn residual_recompose<T: Element>(base_lr: &Tensor<T>, high: &Tensor<T>) -> Result<Tensor<T>> {
    haar_inverse(&WaveletBands {
        low: base_lr.mul_scalar(2.0),
        high: high.clone(),
    })
}
