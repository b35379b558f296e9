//! Raw numeric kernels: direct convolution (forward and both backward
//! directions), 2x2 pooling, nearest upsampling, and the stride-2 grid
//! gather/scatter pair behind the wavelet ops.
//!
//! All loops run in a fixed order so results are bit-reproducible. Inner
//! loops work on contiguous slices to keep them auto-vectorizable.

use super::{Element, Shape};

pub(crate) fn conv2d_out_shape(xs: Shape, ws: Shape, stride: usize, padding: usize) -> Shape {
    let oh = (xs.h + 2 * padding - ws.h) / stride + 1;
    let ow = (xs.w + 2 * padding - ws.w) / stride + 1;
    Shape::new(xs.n, ws.n, oh, ow)
}

fn pad_input<T: Element>(x: &[T], xs: Shape, pad: usize) -> (Vec<T>, usize, usize) {
    let (hp, wp) = (xs.h + 2 * pad, xs.w + 2 * pad);
    if pad == 0 {
        return (x.to_vec(), hp, wp);
    }
    let mut out = vec![T::ZERO; xs.n * xs.c * hp * wp];
    for plane in 0..xs.n * xs.c {
        let src = &x[plane * xs.h * xs.w..][..xs.h * xs.w];
        let dst = &mut out[plane * hp * wp..][..hp * wp];
        for r in 0..xs.h {
            dst[(r + pad) * wp + pad..(r + pad) * wp + pad + xs.w]
                .copy_from_slice(&src[r * xs.w..(r + 1) * xs.w]);
        }
    }
    (out, hp, wp)
}

#[inline]
fn dot<T: Element>(a: &[T], b: &[T]) -> T {
    let mut s0 = T::ZERO;
    let mut s1 = T::ZERO;
    let mut s2 = T::ZERO;
    let mut s3 = T::ZERO;
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (pa, pb) in (&mut ca).zip(&mut cb) {
        s0 += pa[0] * pb[0];
        s1 += pa[1] * pb[1];
        s2 += pa[2] * pb[2];
        s3 += pa[3] * pb[3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        s += *x * *y;
    }
    s
}

#[inline]
fn axpy<T: Element>(dst: &mut [T], src: &[T], scale: T) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * *s;
    }
}

pub(crate) fn conv2d<T: Element>(
    x: &[T],
    xs: Shape,
    w: &[T],
    ws: Shape,
    b: &[T],
    stride: usize,
    padding: usize,
) -> Vec<T> {
    let os = conv2d_out_shape(xs, ws, stride, padding);
    let (xp, _hp, wp) = pad_input(x, xs, padding);
    let (kh, kw) = (ws.h, ws.w);
    let out_plane_len = os.h * os.w;
    let in_plane_len = (xs.h + 2 * padding) * wp;
    let mut out = vec![T::ZERO; os.numel()];

    for n in 0..xs.n {
        for oc in 0..os.c {
            let out_plane = &mut out[(n * os.c + oc) * out_plane_len..][..out_plane_len];
            out_plane.fill(b[oc]);
            for ic in 0..xs.c {
                let xplane = &xp[(n * xs.c + ic) * in_plane_len..][..in_plane_len];
                for kr in 0..kh {
                    for kc in 0..kw {
                        let wv = w[((oc * xs.c + ic) * kh + kr) * kw + kc];
                        if stride == 1 {
                            for oh in 0..os.h {
                                let src = &xplane[(oh + kr) * wp + kc..][..os.w];
                                let dst = &mut out_plane[oh * os.w..][..os.w];
                                axpy(dst, src, wv);
                            }
                        } else {
                            for oh in 0..os.h {
                                let row = (oh * stride + kr) * wp + kc;
                                let dst = &mut out_plane[oh * os.w..][..os.w];
                                for (ow, d) in dst.iter_mut().enumerate() {
                                    *d += wv * xplane[row + ow * stride];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn conv2d_dx<T: Element>(
    dy: &[T],
    os: Shape,
    w: &[T],
    ws: Shape,
    xs: Shape,
    stride: usize,
    padding: usize,
) -> Vec<T> {
    let (hp, wp) = (xs.h + 2 * padding, xs.w + 2 * padding);
    let mut dxp = vec![T::ZERO; xs.n * xs.c * hp * wp];
    let out_plane_len = os.h * os.w;
    let (kh, kw) = (ws.h, ws.w);

    for n in 0..xs.n {
        for ic in 0..xs.c {
            let dplane = &mut dxp[(n * xs.c + ic) * hp * wp..][..hp * wp];
            for oc in 0..os.c {
                let dy_plane = &dy[(n * os.c + oc) * out_plane_len..][..out_plane_len];
                for kr in 0..kh {
                    for kc in 0..kw {
                        let wv = w[((oc * xs.c + ic) * kh + kr) * kw + kc];
                        if stride == 1 {
                            for oh in 0..os.h {
                                let dst = &mut dplane[(oh + kr) * wp + kc..][..os.w];
                                let src = &dy_plane[oh * os.w..][..os.w];
                                axpy(dst, src, wv);
                            }
                        } else {
                            for oh in 0..os.h {
                                let row = (oh * stride + kr) * wp + kc;
                                let src = &dy_plane[oh * os.w..][..os.w];
                                for (ow, s) in src.iter().enumerate() {
                                    dplane[row + ow * stride] += wv * *s;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    if padding == 0 {
        return dxp;
    }
    let mut dx = vec![T::ZERO; xs.numel()];
    for plane in 0..xs.n * xs.c {
        let src = &dxp[plane * hp * wp..][..hp * wp];
        let dst = &mut dx[plane * xs.h * xs.w..][..xs.h * xs.w];
        for r in 0..xs.h {
            dst[r * xs.w..(r + 1) * xs.w]
                .copy_from_slice(&src[(r + padding) * wp + padding..][..xs.w]);
        }
    }
    dx
}

pub(crate) fn conv2d_dw<T: Element>(
    dy: &[T],
    os: Shape,
    x: &[T],
    xs: Shape,
    ws: Shape,
    stride: usize,
    padding: usize,
) -> Vec<T> {
    let (xp, _hp, wp) = pad_input(x, xs, padding);
    let in_plane_len = (xs.h + 2 * padding) * wp;
    let out_plane_len = os.h * os.w;
    let (kh, kw) = (ws.h, ws.w);
    let mut dw = vec![T::ZERO; ws.numel()];

    for oc in 0..os.c {
        for ic in 0..xs.c {
            for kr in 0..kh {
                for kc in 0..kw {
                    let mut acc = T::ZERO;
                    for n in 0..xs.n {
                        let dy_plane = &dy[(n * os.c + oc) * out_plane_len..][..out_plane_len];
                        let xplane = &xp[(n * xs.c + ic) * in_plane_len..][..in_plane_len];
                        if stride == 1 {
                            for oh in 0..os.h {
                                let a = &dy_plane[oh * os.w..][..os.w];
                                let b = &xplane[(oh + kr) * wp + kc..][..os.w];
                                acc += dot(a, b);
                            }
                        } else {
                            for oh in 0..os.h {
                                let row = (oh * stride + kr) * wp + kc;
                                let a = &dy_plane[oh * os.w..][..os.w];
                                for (ow, g) in a.iter().enumerate() {
                                    acc += *g * xplane[row + ow * stride];
                                }
                            }
                        }
                    }
                    dw[((oc * xs.c + ic) * kh + kr) * kw + kc] = acc;
                }
            }
        }
    }
    dw
}

pub(crate) fn conv2d_db<T: Element>(dy: &[T], os: Shape) -> Vec<T> {
    let plane = os.h * os.w;
    let mut db = vec![T::ZERO; os.c];
    for n in 0..os.n {
        for oc in 0..os.c {
            let p = &dy[(n * os.c + oc) * plane..][..plane];
            let mut s = T::ZERO;
            for v in p {
                s += *v;
            }
            db[oc] += s;
        }
    }
    db
}

/// Non-overlapping 2x2 mean; halves both spatial dims.
pub(crate) fn avg_pool2<T: Element>(x: &[T], xs: Shape) -> Vec<T> {
    let quarter = T::from_f64(0.25);
    pool2(x, xs, |a, b, c, d| ((a + b) + (c + d)) * quarter)
}

/// Non-overlapping 2x2 sum (adjoint of nearest upsampling).
pub(crate) fn sum_pool2<T: Element>(x: &[T], xs: Shape) -> Vec<T> {
    pool2(x, xs, |a, b, c, d| (a + b) + (c + d))
}

fn pool2<T: Element>(x: &[T], xs: Shape, f: impl Fn(T, T, T, T) -> T) -> Vec<T> {
    let (oh, ow) = (xs.h / 2, xs.w / 2);
    let mut out = vec![T::ZERO; xs.n * xs.c * oh * ow];
    for plane in 0..xs.n * xs.c {
        let src = &x[plane * xs.h * xs.w..][..xs.h * xs.w];
        let dst = &mut out[plane * oh * ow..][..oh * ow];
        for r in 0..oh {
            let top = &src[2 * r * xs.w..][..xs.w];
            let bot = &src[(2 * r + 1) * xs.w..][..xs.w];
            let drow = &mut dst[r * ow..][..ow];
            for c in 0..ow {
                drow[c] = f(top[2 * c], top[2 * c + 1], bot[2 * c], bot[2 * c + 1]);
            }
        }
    }
    out
}

/// Doubles both spatial dims by pixel replication.
pub(crate) fn nearest_up2<T: Element>(x: &[T], xs: Shape) -> Vec<T> {
    let (oh, ow) = (xs.h * 2, xs.w * 2);
    let mut out = vec![T::ZERO; xs.n * xs.c * oh * ow];
    for plane in 0..xs.n * xs.c {
        let src = &x[plane * xs.h * xs.w..][..xs.h * xs.w];
        let dst = &mut out[plane * oh * ow..][..oh * ow];
        for r in 0..xs.h {
            let srow = &src[r * xs.w..][..xs.w];
            let (top, bot) = dst[2 * r * ow..][..2 * ow].split_at_mut(ow);
            for c in 0..xs.w {
                top[2 * c] = srow[c];
                top[2 * c + 1] = srow[c];
            }
            bot.copy_from_slice(top);
        }
    }
    out
}

/// Stride-2 sub-grid starting at (row, col) with row, col in {0, 1}.
pub(crate) fn subgrid2<T: Element>(x: &[T], xs: Shape, row: usize, col: usize) -> Vec<T> {
    let (oh, ow) = (xs.h / 2, xs.w / 2);
    let mut out = vec![T::ZERO; xs.n * xs.c * oh * ow];
    for plane in 0..xs.n * xs.c {
        let src = &x[plane * xs.h * xs.w..][..xs.h * xs.w];
        let dst = &mut out[plane * oh * ow..][..oh * ow];
        for r in 0..oh {
            let srow = &src[(2 * r + row) * xs.w..][..xs.w];
            let drow = &mut dst[r * ow..][..ow];
            for c in 0..ow {
                drow[c] = srow[2 * c + col];
            }
        }
    }
    out
}

/// Adjoint of [`subgrid2`]: places x on the (row, col) sub-grid of a
/// double-size output, zeros elsewhere.
pub(crate) fn scatter2<T: Element>(x: &[T], xs: Shape, row: usize, col: usize) -> Vec<T> {
    let (oh, ow) = (xs.h * 2, xs.w * 2);
    let mut out = vec![T::ZERO; xs.n * xs.c * oh * ow];
    for plane in 0..xs.n * xs.c {
        let src = &x[plane * xs.h * xs.w..][..xs.h * xs.w];
        let dst = &mut out[plane * oh * ow..][..oh * ow];
        for r in 0..xs.h {
            let srow = &src[r * xs.w..][..xs.w];
            let drow = &mut dst[(2 * r + row) * ow..][..ow];
            for c in 0..xs.w {
                drow[2 * c + col] = srow[c];
            }
        }
    }
    out
}
