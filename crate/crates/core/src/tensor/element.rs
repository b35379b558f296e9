//! Scalar element trait: the tensor stack is generic over f32 (training,
//! inference, checkpoints) and f64 (gradient and invertibility verification).

use std::cell::RefCell;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub};

use super::tape::TapeInner;

pub trait Element:
    Copy
    + Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + MulAssign
{
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn tanh(self) -> Self;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn is_finite(self) -> bool;

    /// Access this thread's recording tape for the element type, if any.
    /// One tape per scalar type per thread; recording is single-threaded.
    #[doc(hidden)]
    fn with_tape<R>(f: impl FnOnce(&mut Option<TapeInner<Self>>) -> R) -> R;
}

thread_local! {
    static TAPE_F32: RefCell<Option<TapeInner<f32>>> = const { RefCell::new(None) };
    static TAPE_F64: RefCell<Option<TapeInner<f64>>> = const { RefCell::new(None) };
}

impl Element for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline(always)]
    fn exp(self) -> Self {
        f32::exp(self)
    }
    #[inline(always)]
    fn tanh(self) -> Self {
        f32::tanh(self)
    }
    #[inline(always)]
    fn abs(self) -> Self {
        f32::abs(self)
    }
    #[inline(always)]
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    #[inline(always)]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }

    fn with_tape<R>(f: impl FnOnce(&mut Option<TapeInner<Self>>) -> R) -> R {
        TAPE_F32.with(|cell| f(&mut cell.borrow_mut()))
    }
}

impl Element for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline(always)]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline(always)]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline(always)]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline(always)]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline(always)]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }

    fn with_tape<R>(f: impl FnOnce(&mut Option<TapeInner<Self>>) -> R) -> R {
        TAPE_F64.with(|cell| f(&mut cell.borrow_mut()))
    }
}
