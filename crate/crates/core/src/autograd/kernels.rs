//! Raw array kernels behind the differentiable operations. Tensors here are
//! plain values; shape validation happens in `ops`.

use super::tensor::{Scalar, Tensor};

fn t<T: Scalar>(shape: Vec<usize>, data: Vec<T>) -> Tensor<T> {
    Tensor::new(shape, data).expect("kernel produced consistent shape")
}

/// Output extent of a valid (unpadded) convolution.
pub fn conv_out(extent: usize, kernel: usize, stride: usize) -> usize {
    (extent - kernel) / stride + 1
}

struct ConvGeom {
    w: usize,
    ci: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    ho: usize,
    wo: usize,
}

impl ConvGeom {
    fn cols(&self) -> usize {
        self.kh * self.kw * self.ci
    }
    fn rows(&self) -> usize {
        self.ho * self.wo
    }
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1
    }
}

fn im2col<T: Scalar>(x: &[T], g: &ConvGeom, col: &mut [T]) {
    let k = g.cols();
    for oy in 0..g.ho {
        for ox in 0..g.wo {
            let row = &mut col[(oy * g.wo + ox) * k..][..k];
            let mut o = 0;
            for ky in 0..g.kh {
                let iy = oy * g.stride + ky;
                for kx in 0..g.kw {
                    let ix = ox * g.stride + kx;
                    let src = &x[(iy * g.w + ix) * g.ci..][..g.ci];
                    row[o..o + g.ci].copy_from_slice(src);
                    o += g.ci;
                }
            }
        }
    }
}

fn col2im_add<T: Scalar>(col: &[T], g: &ConvGeom, x: &mut [T]) {
    let k = g.cols();
    for oy in 0..g.ho {
        for ox in 0..g.wo {
            let row = &col[(oy * g.wo + ox) * k..][..k];
            let mut o = 0;
            for ky in 0..g.kh {
                let iy = oy * g.stride + ky;
                for kx in 0..g.kw {
                    let ix = ox * g.stride + kx;
                    let dst = &mut x[(iy * g.w + ix) * g.ci..][..g.ci];
                    for (d, &s) in dst.iter_mut().zip(&row[o..o + g.ci]) {
                        *d = *d + s;
                    }
                    o += g.ci;
                }
            }
        }
    }
}

/// Valid cross-correlation: `x` is `N x H x W x Ci`, `w` is `kh x kw x Ci x Co`.
pub fn conv2d<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, stride: usize) -> Tensor<T> {
    let [n, h, wd, ci] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let [kh, kw, _, co] = [w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]];
    let g = ConvGeom {
        w: wd,
        ci,
        kh,
        kw,
        stride,
        ho: conv_out(h, kh, stride),
        wo: conv_out(wd, kw, stride),
    };
    let (m, k) = (g.rows(), g.cols());
    let mut out = vec![T::zero(); n * m * co];
    let mut col = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); m * k]
    };
    for s in 0..n {
        let xs = &x.data()[s * h * wd * ci..][..h * wd * ci];
        let a: &[T] = if g.is_pointwise() {
            xs
        } else {
            im2col(xs, &g, &mut col);
            &col
        };
        let os = &mut out[s * m * co..][..m * co];
        unsafe {
            T::gemm(
                m,
                k,
                co,
                T::one(),
                a.as_ptr(),
                k as isize,
                1,
                w.data().as_ptr(),
                co as isize,
                1,
                T::zero(),
                os.as_mut_ptr(),
                co as isize,
                1,
            );
        }
    }
    t(vec![n, g.ho, g.wo, co], out)
}

/// Adjoint of [`conv2d`] with respect to its input.
pub fn conv2d_backward_data<T: Scalar>(
    gy: &Tensor<T>,
    w: &Tensor<T>,
    stride: usize,
    in_h: usize,
    in_w: usize,
) -> Tensor<T> {
    let [n, ho, wo, co] = [gy.shape()[0], gy.shape()[1], gy.shape()[2], gy.shape()[3]];
    let [kh, kw, ci, _] = [w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]];
    let g = ConvGeom {
        w: in_w,
        ci,
        kh,
        kw,
        stride,
        ho,
        wo,
    };
    let (m, k) = (g.rows(), g.cols());
    let plane = in_h * in_w * ci;
    let mut out = vec![T::zero(); n * plane];
    let mut gcol = vec![T::zero(); if g.is_pointwise() { 0 } else { m * k }];
    for s in 0..n {
        let gs = &gy.data()[s * m * co..][..m * co];
        let os = &mut out[s * plane..][..plane];
        let dst: *mut T = if g.is_pointwise() {
            os.as_mut_ptr()
        } else {
            gcol.as_mut_ptr()
        };
        unsafe {
            T::gemm(
                m,
                co,
                k,
                T::one(),
                gs.as_ptr(),
                co as isize,
                1,
                w.data().as_ptr(),
                1,
                co as isize,
                T::zero(),
                dst,
                k as isize,
                1,
            );
        }
        if !g.is_pointwise() {
            col2im_add(&gcol, &g, os);
        }
    }
    t(vec![n, in_h, in_w, ci], out)
}

/// Adjoint of [`conv2d`] with respect to its kernel.
pub fn conv2d_backward_filter<T: Scalar>(
    x: &Tensor<T>,
    gy: &Tensor<T>,
    kh: usize,
    kw: usize,
    stride: usize,
) -> Tensor<T> {
    let [n, h, wd, ci] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let [_, ho, wo, co] = [gy.shape()[0], gy.shape()[1], gy.shape()[2], gy.shape()[3]];
    let g = ConvGeom {
        w: wd,
        ci,
        kh,
        kw,
        stride,
        ho,
        wo,
    };
    let (m, k) = (g.rows(), g.cols());
    let mut gw = vec![T::zero(); k * co];
    let mut col = vec![T::zero(); if g.is_pointwise() { 0 } else { m * k }];
    for s in 0..n {
        let xs = &x.data()[s * h * wd * ci..][..h * wd * ci];
        let a: &[T] = if g.is_pointwise() {
            xs
        } else {
            im2col(xs, &g, &mut col);
            &col
        };
        let gs = &gy.data()[s * m * co..][..m * co];
        unsafe {
            T::gemm(
                k,
                m,
                co,
                T::one(),
                a.as_ptr(),
                1,
                k as isize,
                gs.as_ptr(),
                co as isize,
                1,
                T::one(),
                gw.as_mut_ptr(),
                co as isize,
                1,
            );
        }
    }
    t(vec![kh, kw, ci, co], gw)
}

/// `op(a) * op(b)` for rank-2 operands, where `op` optionally transposes.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, ta: bool, tb: bool) -> Tensor<T> {
    let (ar, ac) = (a.shape()[0], a.shape()[1]);
    let (br, bc) = (b.shape()[0], b.shape()[1]);
    let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
    let n = if tb { br } else { bc };
    let (rsa, csa) = if ta { (1, ac as isize) } else { (ac as isize, 1) };
    let (rsb, csb) = if tb { (1, bc as isize) } else { (bc as isize, 1) };
    let mut out = vec![T::zero(); m * n];
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::one(),
            a.data().as_ptr(),
            rsa,
            csa,
            b.data().as_ptr(),
            rsb,
            csb,
            T::zero(),
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    t(vec![m, n], out)
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r as usize
}

/// Reflective padding (edge sample excluded) of width `p` on both spatial axes.
pub fn reflect_pad<T: Scalar>(x: &Tensor<T>, p: usize) -> Tensor<T> {
    let [n, h, w, c] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let (hp, wp) = (h + 2 * p, w + 2 * p);
    let mut out = vec![T::zero(); n * hp * wp * c];
    for s in 0..n {
        for y in 0..hp {
            let sy = reflect(y as isize - p as isize, h);
            for xx in 0..wp {
                let sx = reflect(xx as isize - p as isize, w);
                let src = &x.data()[((s * h + sy) * w + sx) * c..][..c];
                out[((s * hp + y) * wp + xx) * c..][..c].copy_from_slice(src);
            }
        }
    }
    t(vec![n, hp, wp, c], out)
}

/// Adjoint of [`reflect_pad`]: folds padded cells back onto their sources.
pub fn reflect_pad_adjoint<T: Scalar>(g: &Tensor<T>, p: usize) -> Tensor<T> {
    let [n, hp, wp, c] = [g.shape()[0], g.shape()[1], g.shape()[2], g.shape()[3]];
    let (h, w) = (hp - 2 * p, wp - 2 * p);
    let mut out = vec![T::zero(); n * h * w * c];
    for s in 0..n {
        for y in 0..hp {
            let sy = reflect(y as isize - p as isize, h);
            for xx in 0..wp {
                let sx = reflect(xx as isize - p as isize, w);
                let src = &g.data()[((s * hp + y) * wp + xx) * c..][..c];
                let dst = &mut out[((s * h + sy) * w + sx) * c..][..c];
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d = *d + v;
                }
            }
        }
    }
    t(vec![n, h, w, c], out)
}

pub fn avg_pool2<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let [n, h, w, c] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let (ho, wo) = (h / 2, w / 2);
    let quarter = T::of(0.25);
    let mut out = vec![T::zero(); n * ho * wo * c];
    for s in 0..n {
        for y in 0..ho {
            for xx in 0..wo {
                let dst = &mut out[((s * ho + y) * wo + xx) * c..][..c];
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let src = &x.data()[((s * h + 2 * y + dy) * w + 2 * xx + dx) * c..][..c];
                    for (d, &v) in dst.iter_mut().zip(src) {
                        *d = *d + v;
                    }
                }
                for d in dst.iter_mut() {
                    *d = *d * quarter;
                }
            }
        }
    }
    t(vec![n, ho, wo, c], out)
}

pub fn upsample2<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let [n, h, w, c] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let (ho, wo) = (2 * h, 2 * w);
    let mut out = vec![T::zero(); n * ho * wo * c];
    for s in 0..n {
        for y in 0..ho {
            for xx in 0..wo {
                let src = &x.data()[((s * h + y / 2) * w + xx / 2) * c..][..c];
                out[((s * ho + y) * wo + xx) * c..][..c].copy_from_slice(src);
            }
        }
    }
    t(vec![n, ho, wo, c], out)
}

/// Sums `N x H x W x C` over the spatial axes, giving `N x C`.
pub fn sum_spatial<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let [n, h, w, c] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let mut out = vec![T::zero(); n * c];
    for s in 0..n {
        let dst = &mut out[s * c..][..c];
        for p in 0..h * w {
            for (d, &v) in dst.iter_mut().zip(&x.data()[(s * h * w + p) * c..][..c]) {
                *d = *d + v;
            }
        }
    }
    t(vec![n, c], out)
}

/// Broadcasts `N x C` over an `h x w` spatial plane.
pub fn broadcast_spatial<T: Scalar>(x: &Tensor<T>, h: usize, w: usize) -> Tensor<T> {
    let (n, c) = (x.shape()[0], x.shape()[1]);
    let mut out = Vec::with_capacity(n * h * w * c);
    for s in 0..n {
        let src = &x.data()[s * c..][..c];
        for _ in 0..h * w {
            out.extend_from_slice(src);
        }
    }
    t(vec![n, h, w, c], out)
}

/// Sums over every axis but the last.
pub fn sum_to_last<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let c = *x.shape().last().expect("rank >= 1");
    let mut out = vec![T::zero(); c];
    for chunk in x.data().chunks_exact(c) {
        for (d, &v) in out.iter_mut().zip(chunk) {
            *d = *d + v;
        }
    }
    t(vec![c], out)
}

pub fn broadcast_last<T: Scalar>(b: &Tensor<T>, shape: &[usize]) -> Tensor<T> {
    let c = b.len();
    let total: usize = shape.iter().product();
    let mut out = Vec::with_capacity(total);
    for _ in 0..total / c {
        out.extend_from_slice(b.data());
    }
    t(shape.to_vec(), out)
}

/// Sums every sample (leading axis) to one value: `N x ...` to `N`.
pub fn sum_per_sample<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let n = x.batch();
    let per = x.len() / n;
    let out = x
        .data()
        .chunks_exact(per)
        .map(|c| c.iter().fold(T::zero(), |a, &v| a + v))
        .collect();
    t(vec![n], out)
}

pub fn broadcast_per_sample<T: Scalar>(v: &Tensor<T>, shape: &[usize]) -> Tensor<T> {
    let n = shape[0];
    let per: usize = shape[1..].iter().product();
    let mut out = Vec::with_capacity(n * per);
    for &x in v.data() {
        out.extend(std::iter::repeat_n(x, per));
    }
    t(shape.to_vec(), out)
}

pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let [n, h, w, ca] = [a.shape()[0], a.shape()[1], a.shape()[2], a.shape()[3]];
    let cb = b.shape()[3];
    let mut out = Vec::with_capacity(n * h * w * (ca + cb));
    for p in 0..n * h * w {
        out.extend_from_slice(&a.data()[p * ca..][..ca]);
        out.extend_from_slice(&b.data()[p * cb..][..cb]);
    }
    t(vec![n, h, w, ca + cb], out)
}

pub fn slice_channels<T: Scalar>(x: &Tensor<T>, start: usize, len: usize) -> Tensor<T> {
    let [n, h, w, c] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
    let mut out = Vec::with_capacity(n * h * w * len);
    for p in 0..n * h * w {
        out.extend_from_slice(&x.data()[p * c + start..][..len]);
    }
    t(vec![n, h, w, len], out)
}
