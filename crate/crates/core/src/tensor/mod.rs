//! Dense 4-D tensors with reverse-mode differentiation.
//!
//! Tensors are immutable values: every operation allocates its result, no
//! operation mutates an input. Shape is always (n, c, h, w), data is
//! contiguous row-major. Gradient tracking is opt-in per tensor via
//! [`Tensor::requires_grad`] and active only while a [`Recording`] is open on
//! the current thread; inference builds no tape.

mod conv;
mod element;
mod ops;
mod tape;

pub use element::Element;
pub use tape::{Gradients, Recording};

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

/// (batch, channels, height, width)
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    /// A scalar lives in a (1,1,1,1) tensor.
    pub fn scalar() -> Self {
        Shape::new(1, 1, 1, 1)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

static NEXT_UID: AtomicU64 = AtomicU64::new(1);

fn fresh_uid() -> u64 {
    NEXT_UID.fetch_add(1, Ordering::Relaxed)
}

/// Dense 4-D tensor. Cloning is cheap (shared storage) and clones keep the
/// identity of the original, so gradients looked up by either handle agree.
#[derive(Clone, Debug)]
pub struct Tensor<T: Element = f32> {
    shape: Shape,
    data: Arc<[T]>,
    uid: u64,
    requires_grad: bool,
}

impl<T: Element> Tensor<T> {
    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::invalid(
                "from_vec",
                format!("{} elements provided for shape {shape}", data.len()),
            ));
        }
        Ok(Tensor {
            shape,
            data: data.into(),
            uid: fresh_uid(),
            requires_grad: false,
        })
    }

    pub(crate) fn from_parts(shape: Shape, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), shape.numel());
        Tensor {
            shape,
            data: data.into(),
            uid: fresh_uid(),
            requires_grad: false,
        }
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor::from_parts(shape, vec![T::ZERO; shape.numel()])
    }

    pub fn full(shape: Shape, value: f64) -> Self {
        Tensor::from_parts(shape, vec![T::from_f64(value); shape.numel()])
    }

    pub fn scalar(value: f64) -> Self {
        Tensor::full(Shape::scalar(), value)
    }

    /// Mark the tensor as a differentiation leaf (a parameter).
    pub fn requires_grad(mut self, yes: bool) -> Self {
        self.requires_grad = yes;
        self
    }

    pub fn is_leaf(&self) -> bool {
        self.requires_grad
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn numel(&self) -> usize {
        self.shape.numel()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub(crate) fn data_arc(&self) -> Arc<[T]> {
        Arc::clone(&self.data)
    }

    pub(crate) fn uid(&self) -> u64 {
        self.uid
    }

    /// Element accessor for tests and small readers; row-major (n, c, h, w).
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        let s = self.shape;
        self.data[((n * s.c + c) * s.h + h) * s.w + w]
    }

    /// The single value of a scalar tensor.
    pub fn item(&self) -> T {
        debug_assert_eq!(self.numel(), 1);
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Element>(&self) -> Tensor<U> {
        Tensor::from_parts(
            self.shape,
            self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        )
    }

    /// Max absolute difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Tensor<T>) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a.to_f64() - b.to_f64()).abs())
            .fold(0.0, f64::max)
    }

    /// Squared L2 norm in f64.
    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64() * v.to_f64()).sum()
    }

    /// Identical shape and bit pattern.
    pub fn bit_eq(&self, other: &Tensor<T>) -> bool {
        self.shape == other.shape
            && self
                .data
                .iter()
                .zip(other.data.iter())
                .all(|(a, b)| a.to_f64().to_bits() == b.to_f64().to_bits())
    }

    /// Reflect-pad bottom/right so both spatial dims are multiples of `m`.
    /// Not recorded on the tape; meant for inference-side size handling.
    pub fn reflect_pad_to_multiple(&self, m: usize) -> Tensor<T> {
        let s = self.shape;
        let (ph, pw) = (s.h.next_multiple_of(m), s.w.next_multiple_of(m));
        if (ph, pw) == (s.h, s.w) {
            return self.clone();
        }
        let mirror = |i: usize, len: usize| -> usize {
            if i < len {
                i
            } else {
                len.saturating_sub(2 + (i - len)).min(len - 1)
            }
        };
        let mut data = vec![T::ZERO; s.n * s.c * ph * pw];
        for plane in 0..s.n * s.c {
            let src = &self.data[plane * s.h * s.w..][..s.h * s.w];
            let dst = &mut data[plane * ph * pw..][..ph * pw];
            for r in 0..ph {
                let sr = mirror(r, s.h);
                for c in 0..pw {
                    dst[r * pw + c] = src[sr * s.w + mirror(c, s.w)];
                }
            }
        }
        Tensor::from_parts(Shape::new(s.n, s.c, ph, pw), data)
    }

    /// Top-left spatial crop to (h, w). Not recorded on the tape.
    pub fn crop_spatial(&self, h: usize, w: usize) -> Tensor<T> {
        let s = self.shape;
        assert!(h <= s.h && w <= s.w, "crop {h}x{w} exceeds {s}");
        if (s.h, s.w) == (h, w) {
            return self.clone();
        }
        let mut data = vec![T::ZERO; s.n * s.c * h * w];
        for plane in 0..s.n * s.c {
            let src = &self.data[plane * s.h * s.w..][..s.h * s.w];
            let dst = &mut data[plane * h * w..][..h * w];
            for r in 0..h {
                dst[r * w..(r + 1) * w].copy_from_slice(&src[r * s.w..r * s.w + w]);
            }
        }
        Tensor::from_parts(Shape::new(s.n, s.c, h, w), data)
    }
}

impl Tensor<f32> {
    /// Gaussian-filled tensor, deterministic under the provided generator.
    pub fn randn(shape: Shape, std: f64, rng: &mut crate::rng::Rng) -> Self {
        Tensor::from_parts(
            shape,
            (0..shape.numel())
                .map(|_| (rng.gauss() * std) as f32)
                .collect(),
        )
    }
}

impl Tensor<f64> {
    pub fn randn64(shape: Shape, std: f64, rng: &mut crate::rng::Rng) -> Self {
        Tensor::from_parts(
            shape,
            (0..shape.numel()).map(|_| rng.gauss() * std).collect(),
        )
    }
}
