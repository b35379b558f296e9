//! Tensor operations. Every op validates shapes, computes its result into a
//! fresh tensor, and records itself on the active tape when gradient tracking
//! is on. Elementwise ops require identical shapes; the only broadcasting is
//! tensor-scalar.

use crate::error::{Error, Result};

use super::conv;
use super::tape::{record_op, OpKind};
use super::{Element, Shape, Tensor};

impl<T: Element> Tensor<T> {
    fn binary(
        &self,
        rhs: &Tensor<T>,
        op: &'static str,
        kind: OpKind<T>,
        save: bool,
        f: impl Fn(T, T) -> T,
    ) -> Result<Tensor<T>> {
        if self.shape() != rhs.shape() {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let data = self
            .data()
            .iter()
            .zip(rhs.data().iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        let out = Tensor::from_parts(self.shape(), data);
        record_op(kind, &[self, rhs], &[save, save], false, &out);
        Ok(out)
    }

    fn unary(
        &self,
        kind: OpKind<T>,
        save_input: bool,
        save_output: bool,
        f: impl Fn(T) -> T,
    ) -> Tensor<T> {
        let data = self.data().iter().map(|&v| f(v)).collect();
        let out = Tensor::from_parts(self.shape(), data);
        record_op(kind, &[self], &[save_input], save_output, &out);
        out
    }

    pub fn add(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(rhs, "add", OpKind::Add, false, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(rhs, "sub", OpKind::Sub, false, |a, b| a - b)
    }

    pub fn mul(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(rhs, "mul", OpKind::Mul, true, |a, b| a * b)
    }

    /// Elementwise division. Strict: a divisor containing an exact zero is an
    /// error. The coupling layers always divide by `exp(a*tanh(..))`, which is
    /// strictly positive, so they never trip this.
    pub fn div(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        if let Some(index) = rhs.data().iter().position(|&v| v == T::ZERO) {
            return Err(Error::DivisionByZero { index });
        }
        self.binary(rhs, "div", OpKind::Div, true, |a, b| a / b)
    }

    pub fn neg(&self) -> Tensor<T> {
        self.unary(OpKind::Neg, false, false, |v| -v)
    }

    pub fn exp(&self) -> Tensor<T> {
        self.unary(OpKind::Exp, false, true, |v| v.exp())
    }

    pub fn tanh(&self) -> Tensor<T> {
        self.unary(OpKind::Tanh, false, true, |v| v.tanh())
    }

    pub fn sigmoid(&self) -> Tensor<T> {
        self.unary(OpKind::Sigmoid, false, true, |v| {
            T::ONE / (T::ONE + (-v).exp())
        })
    }

    pub fn leaky_relu(&self, slope: f64) -> Tensor<T> {
        let s = T::from_f64(slope);
        self.unary(OpKind::LeakyRelu(s), true, false, |v| {
            if v >= T::ZERO {
                v
            } else {
                s * v
            }
        })
    }

    pub fn abs(&self) -> Tensor<T> {
        self.unary(OpKind::Abs, true, false, |v| v.abs())
    }

    pub fn add_scalar(&self, s: f64) -> Tensor<T> {
        let s = T::from_f64(s);
        self.unary(OpKind::AddScalar, false, false, |v| v + s)
    }

    pub fn mul_scalar(&self, s: f64) -> Tensor<T> {
        let s = T::from_f64(s);
        self.unary(OpKind::MulScalar(s), false, false, |v| v * s)
    }

    /// Sum of all elements into a (1,1,1,1) tensor.
    pub fn sum(&self) -> Tensor<T> {
        let mut acc = T::ZERO;
        for &v in self.data() {
            acc += v;
        }
        let out = Tensor::from_parts(Shape::scalar(), vec![acc]);
        record_op(OpKind::Sum, &[self], &[false], false, &out);
        out
    }

    /// Mean of all elements into a (1,1,1,1) tensor.
    pub fn mean(&self) -> Tensor<T> {
        let mut acc = T::ZERO;
        for &v in self.data() {
            acc += v;
        }
        let out = Tensor::from_parts(
            Shape::scalar(),
            vec![acc * (T::ONE / T::from_f64(self.numel() as f64))],
        );
        record_op(OpKind::Mean, &[self], &[false], false, &out);
        out
    }

    /// Concatenate along the channel axis.
    pub fn concat_channels(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat_channels", "no inputs"))?;
        let base = first.shape();
        let mut c_total = 0;
        for p in parts {
            let s = p.shape();
            if (s.n, s.h, s.w) != (base.n, base.h, base.w) {
                return Err(Error::ShapeMismatch {
                    op: "concat_channels",
                    lhs: base,
                    rhs: s,
                });
            }
            c_total += s.c;
        }
        let out_shape = Shape::new(base.n, c_total, base.h, base.w);
        let plane = base.h * base.w;
        let mut data = vec![T::ZERO; out_shape.numel()];
        let mut c_from = 0;
        for p in parts {
            let ci = p.shape().c;
            for n in 0..base.n {
                for c in 0..ci {
                    let dst = (n * c_total + c_from + c) * plane;
                    let src = (n * ci + c) * plane;
                    data[dst..dst + plane].copy_from_slice(&p.data()[src..src + plane]);
                }
            }
            c_from += ci;
        }
        let out = Tensor::from_parts(out_shape, data);
        let saves = vec![false; parts.len()];
        record_op(OpKind::ConcatChannels, parts, &saves, false, &out);
        Ok(out)
    }

    /// Channels `from..to`.
    pub fn slice_channels(&self, from: usize, to: usize) -> Result<Tensor<T>> {
        let s = self.shape();
        if from >= to || to > s.c {
            return Err(Error::invalid(
                "slice_channels",
                format!("range {from}..{to} out of bounds for {} channels", s.c),
            ));
        }
        let out_shape = Shape::new(s.n, to - from, s.h, s.w);
        let plane = s.h * s.w;
        let mut data = vec![T::ZERO; out_shape.numel()];
        for n in 0..s.n {
            for c in 0..to - from {
                let src = (n * s.c + from + c) * plane;
                let dst = (n * out_shape.c + c) * plane;
                data[dst..dst + plane].copy_from_slice(&self.data()[src..src + plane]);
            }
        }
        let out = Tensor::from_parts(out_shape, data);
        record_op(
            OpKind::SliceChannels { from },
            &[self],
            &[false],
            false,
            &out,
        );
        Ok(out)
    }

    /// Stride-2 sub-grid at offset (row, col), each in {0, 1}. Halves the
    /// spatial dims; requires them even.
    pub fn subgrid2(&self, row: usize, col: usize) -> Result<Tensor<T>> {
        let s = self.shape();
        if !s.h.is_multiple_of(2) || !s.w.is_multiple_of(2) {
            return Err(Error::OddSpatialDims {
                op: "subgrid2",
                shape: s,
            });
        }
        debug_assert!(row < 2 && col < 2);
        let data = conv::subgrid2(self.data(), s, row, col);
        let out = Tensor::from_parts(Shape::new(s.n, s.c, s.h / 2, s.w / 2), data);
        record_op(
            OpKind::Subgrid2 { row, col },
            &[self],
            &[false],
            false,
            &out,
        );
        Ok(out)
    }

    /// Adjoint of [`Tensor::subgrid2`]: doubled output with this tensor on
    /// the (row, col) sub-grid and zeros elsewhere.
    pub fn scatter2(&self, row: usize, col: usize) -> Tensor<T> {
        let s = self.shape();
        debug_assert!(row < 2 && col < 2);
        let data = conv::scatter2(self.data(), s, row, col);
        let out = Tensor::from_parts(Shape::new(s.n, s.c, s.h * 2, s.w * 2), data);
        record_op(
            OpKind::Scatter2 { row, col },
            &[self],
            &[false],
            false,
            &out,
        );
        out
    }

    /// Non-overlapping 2x2 mean pooling; halves both spatial dims.
    pub fn avg_pool2(&self) -> Result<Tensor<T>> {
        let s = self.shape();
        if !s.h.is_multiple_of(2) || !s.w.is_multiple_of(2) {
            return Err(Error::OddSpatialDims {
                op: "avg_pool2",
                shape: s,
            });
        }
        let data = conv::avg_pool2(self.data(), s);
        let out = Tensor::from_parts(Shape::new(s.n, s.c, s.h / 2, s.w / 2), data);
        record_op(OpKind::AvgPool2, &[self], &[false], false, &out);
        Ok(out)
    }

    /// Doubles both spatial dims by replication.
    pub fn nearest_up2(&self) -> Tensor<T> {
        let s = self.shape();
        let data = conv::nearest_up2(self.data(), s);
        let out = Tensor::from_parts(Shape::new(s.n, s.c, s.h * 2, s.w * 2), data);
        record_op(OpKind::NearestUp2, &[self], &[false], false, &out);
        out
    }

    /// 2-D convolution. `weight` is (out_c, in_c, kh, kw) with odd kernel
    /// dims, `bias` holds out_c elements (stored as (1, out_c, 1, 1)).
    pub fn conv2d(
        &self,
        weight: &Tensor<T>,
        bias: &Tensor<T>,
        stride: usize,
        padding: usize,
    ) -> Result<Tensor<T>> {
        let xs = self.shape();
        let ws = weight.shape();
        if ws.c != xs.c {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                lhs: xs,
                rhs: ws,
            });
        }
        if ws.h.is_multiple_of(2) || ws.w.is_multiple_of(2) {
            return Err(Error::invalid(
                "conv2d",
                format!("kernel dims must be odd, got {}x{}", ws.h, ws.w),
            ));
        }
        if stride == 0 {
            return Err(Error::invalid("conv2d", "stride must be >= 1"));
        }
        if bias.numel() != ws.n {
            return Err(Error::invalid(
                "conv2d",
                format!(
                    "bias has {} elements for {} output channels",
                    bias.numel(),
                    ws.n
                ),
            ));
        }
        if xs.h + 2 * padding < ws.h || xs.w + 2 * padding < ws.w {
            return Err(Error::invalid(
                "conv2d",
                format!("kernel {}x{} exceeds padded input {xs}", ws.h, ws.w),
            ));
        }
        let os = conv::conv2d_out_shape(xs, ws, stride, padding);
        let data = conv::conv2d(
            self.data(),
            xs,
            weight.data(),
            ws,
            bias.data(),
            stride,
            padding,
        );
        let out = Tensor::from_parts(os, data);
        record_op(
            OpKind::Conv2d { stride, padding },
            &[self, weight, bias],
            &[true, true, false],
            false,
            &out,
        );
        Ok(out)
    }

    /// Round to the 8-bit grid on [0, 1]. Not differentiable; backward
    /// through it is an error.
    pub fn quantize8(&self) -> Tensor<T> {
        self.unary(OpKind::Quantize8, false, false, |v| {
            let q = (v.to_f64().clamp(0.0, 1.0) * 255.0).round() / 255.0;
            T::from_f64(q)
        })
    }
}
