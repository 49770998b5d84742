//! Differentiable operations. Every backward rule is written in terms of
//! these same operations, so a sweep recorded in higher-order mode can be
//! differentiated again.

use super::graph::Var;
use super::kernels as k;
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Leaf,
    Constant,
    Conv2d { stride: usize },
    Conv2dBackwardData { stride: usize, in_h: usize, in_w: usize },
    Conv2dBackwardFilter { stride: usize, kh: usize, kw: usize },
    ReflectPad { width: usize },
    ReflectPadAdjoint { width: usize },
    MatMul { ta: bool, tb: bool },
    Add,
    Sub,
    Mul,
    Div,
    Scale { factor: f64 },
    AddScalar { value: f64 },
    LeakyRelu { slope: f64 },
    LeakyMask { slope: f64 },
    Sqrt,
    ConcatChannels,
    SliceChannels { start: usize, len: usize },
    AvgPool2,
    Upsample2,
    SumSpatial,
    BroadcastSpatial { h: usize, w: usize },
    SumToLast,
    BroadcastLast { shape: Vec<usize> },
    SumPerSample,
    BroadcastPerSample { shape: Vec<usize> },
    Reshape { shape: Vec<usize> },
}

impl Op {
    pub fn tag(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Constant => "constant",
            Op::Conv2d { .. } => "conv2d",
            Op::Conv2dBackwardData { .. } => "conv2d-backward-data",
            Op::Conv2dBackwardFilter { .. } => "conv2d-backward-filter",
            Op::ReflectPad { .. } => "reflect-pad",
            Op::ReflectPadAdjoint { .. } => "reflect-pad-adjoint",
            Op::MatMul { .. } => "matmul",
            Op::Add => "add",
            Op::Sub => "subtract",
            Op::Mul => "elementwise-multiply",
            Op::Div => "divide",
            Op::Scale { .. } => "scalar-scale",
            Op::AddScalar { .. } => "add-scalar",
            Op::LeakyRelu { .. } => "leaky-relu",
            Op::LeakyMask { .. } => "leaky-relu-mask",
            Op::Sqrt => "sqrt",
            Op::ConcatChannels => "concat-channels",
            Op::SliceChannels { .. } => "slice-channels",
            Op::AvgPool2 => "avg-pool",
            Op::Upsample2 => "nearest-neighbor-upsample",
            Op::SumSpatial => "sum-spatial",
            Op::BroadcastSpatial { .. } => "broadcast-spatial",
            Op::SumToLast => "sum-to-last",
            Op::BroadcastLast { .. } => "broadcast-last",
            Op::SumPerSample => "sum-per-sample",
            Op::BroadcastPerSample { .. } => "broadcast-per-sample",
            Op::Reshape { .. } => "reshape",
        }
    }
}

fn same_shape<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("operands {:?} and {:?} differ", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

impl<'g, T: Scalar> Var<'g, T> {
    fn binary(
        self,
        other: Var<'g, T>,
        op: Op,
        f: impl Fn(T, T) -> T,
    ) -> Result<Var<'g, T>> {
        let (a, b) = (self.value(), other.value());
        same_shape(op.tag(), &a, &b)?;
        let v = a.zip_map(&b, f);
        Ok(self.graph().push(op, &[self, other], v))
    }

    fn unary(self, op: Op, f: impl Fn(T) -> T) -> Var<'g, T> {
        let v = self.value().map(f);
        self.graph().push(op, &[self], v)
    }

    pub fn add(self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        self.binary(other, Op::Add, |a, b| a + b)
    }

    pub fn sub(self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        self.binary(other, Op::Sub, |a, b| a - b)
    }

    pub fn mul(self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        self.binary(other, Op::Mul, |a, b| a * b)
    }

    /// Elementwise quotient; entries with a zero divisor are defined as zero.
    pub fn div(self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        self.binary(other, Op::Div, |a, b| if b == T::zero() { T::zero() } else { a / b })
    }

    pub fn scale(self, factor: f64) -> Var<'g, T> {
        let f = T::of(factor);
        self.unary(Op::Scale { factor }, move |a| a * f)
    }

    pub fn neg(self) -> Var<'g, T> {
        self.scale(-1.0)
    }

    pub fn add_scalar(self, value: f64) -> Var<'g, T> {
        let c = T::of(value);
        self.unary(Op::AddScalar { value }, move |a| a + c)
    }

    pub fn square(self) -> Var<'g, T> {
        self.mul(self).expect("operand shapes agree with themselves")
    }

    /// Elementwise square root. Its derivative at zero is taken as zero.
    pub fn sqrt(self) -> Var<'g, T> {
        self.unary(Op::Sqrt, |a| a.sqrt())
    }

    pub fn leaky_relu(self, slope: f64) -> Var<'g, T> {
        let s = T::of(slope);
        self.unary(Op::LeakyRelu { slope }, move |a| if a > T::zero() { a } else { a * s })
    }

    /// `self` scaled elementwise by the leaky-relu derivative at `at`.
    fn leaky_mask(self, at: Var<'g, T>, slope: f64) -> Result<Var<'g, T>> {
        let s = T::of(slope);
        let (g, x) = (self.value(), at.value());
        same_shape("leaky-relu-mask", &g, &x)?;
        let v = g.zip_map(&x, |g, x| if x > T::zero() { g } else { g * s });
        Ok(self.graph().push(Op::LeakyMask { slope }, &[self, at], v))
    }

    /// Valid (unpadded) convolution with kernel `kh x kw x Ci x Co`.
    pub fn conv2d_valid(self, kernel: Var<'g, T>, stride: usize) -> Result<Var<'g, T>> {
        let (x, w) = (self.value(), kernel.value());
        let [_, h, wd, ci] = x.nhwc("conv2d")?;
        let [kh, kw, wci, _] = w.nhwc("conv2d")?;
        if wci != ci {
            return Err(Error::shape(
                "conv2d",
                format!("input has {ci} channels but kernel {:?} expects {wci}", w.shape()),
            ));
        }
        if kh > h || kw > wd || stride == 0 {
            return Err(Error::shape(
                "conv2d",
                format!("kernel {kh}x{kw} stride {stride} does not fit input {h}x{wd}"),
            ));
        }
        let v = k::conv2d(&x, &w, stride);
        Ok(self.graph().push(Op::Conv2d { stride }, &[self, kernel], v))
    }

    fn conv2d_backward_data(
        self,
        kernel: Var<'g, T>,
        stride: usize,
        in_h: usize,
        in_w: usize,
    ) -> Var<'g, T> {
        let v = k::conv2d_backward_data(&self.value(), &kernel.value(), stride, in_h, in_w);
        self.graph()
            .push(Op::Conv2dBackwardData { stride, in_h, in_w }, &[self, kernel], v)
    }

    fn conv2d_backward_filter(
        self,
        grad_out: Var<'g, T>,
        stride: usize,
        kh: usize,
        kw: usize,
    ) -> Var<'g, T> {
        let v = k::conv2d_backward_filter(&self.value(), &grad_out.value(), kh, kw, stride);
        self.graph()
            .push(Op::Conv2dBackwardFilter { stride, kh, kw }, &[self, grad_out], v)
    }

    pub fn reflect_pad(self, width: usize) -> Result<Var<'g, T>> {
        let x = self.value();
        let [_, h, w, _] = x.nhwc("reflect-pad")?;
        if h <= width || w <= width {
            return Err(Error::shape(
                "reflect-pad",
                format!("spatial extent {h}x{w} too small for width {width}"),
            ));
        }
        let v = k::reflect_pad(&x, width);
        Ok(self.graph().push(Op::ReflectPad { width }, &[self], v))
    }

    fn reflect_pad_adjoint(self, width: usize) -> Var<'g, T> {
        let v = k::reflect_pad_adjoint(&self.value(), width);
        self.graph().push(Op::ReflectPadAdjoint { width }, &[self], v)
    }

    pub fn matmul(self, other: Var<'g, T>, ta: bool, tb: bool) -> Result<Var<'g, T>> {
        let (a, b) = (self.value(), other.value());
        if a.rank() != 2 || b.rank() != 2 {
            return Err(Error::shape(
                "matmul",
                format!("operands must be rank 2, got {:?} and {:?}", a.shape(), b.shape()),
            ));
        }
        let ka = if ta { a.shape()[0] } else { a.shape()[1] };
        let kb = if tb { b.shape()[1] } else { b.shape()[0] };
        if ka != kb {
            return Err(Error::shape(
                "matmul",
                format!("inner extents differ: {:?} vs {:?}", a.shape(), b.shape()),
            ));
        }
        let v = k::matmul(&a, &b, ta, tb);
        Ok(self.graph().push(Op::MatMul { ta, tb }, &[self, other], v))
    }

    pub fn concat_channels(self, other: Var<'g, T>) -> Result<Var<'g, T>> {
        let (a, b) = (self.value(), other.value());
        let [n, h, w, _] = a.nhwc("concat-channels")?;
        let [n2, h2, w2, _] = b.nhwc("concat-channels")?;
        if (n, h, w) != (n2, h2, w2) {
            return Err(Error::shape(
                "concat-channels",
                format!("cannot concatenate {:?} with {:?}", a.shape(), b.shape()),
            ));
        }
        let v = k::concat_channels(&a, &b);
        Ok(self.graph().push(Op::ConcatChannels, &[self, other], v))
    }

    pub fn slice_channels(self, start: usize, len: usize) -> Result<Var<'g, T>> {
        let x = self.value();
        let [_, _, _, c] = x.nhwc("slice-channels")?;
        if len == 0 || start + len > c {
            return Err(Error::shape(
                "slice-channels",
                format!("range {start}..{} outside {c} channels", start + len),
            ));
        }
        let v = k::slice_channels(&x, start, len);
        Ok(self.graph().push(Op::SliceChannels { start, len }, &[self], v))
    }

    pub fn avg_pool2(self) -> Result<Var<'g, T>> {
        let x = self.value();
        let [_, h, w, _] = x.nhwc("avg-pool")?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::shape(
                "avg-pool",
                format!("spatial extent {h}x{w} is not divisible by 2"),
            ));
        }
        let v = k::avg_pool2(&x);
        Ok(self.graph().push(Op::AvgPool2, &[self], v))
    }

    pub fn upsample2(self) -> Result<Var<'g, T>> {
        let x = self.value();
        x.nhwc("nearest-neighbor-upsample")?;
        let v = k::upsample2(&x);
        Ok(self.graph().push(Op::Upsample2, &[self], v))
    }

    /// `N x H x W x C` to `N x C`.
    pub fn sum_spatial(self) -> Result<Var<'g, T>> {
        let x = self.value();
        x.nhwc("sum-spatial")?;
        let v = k::sum_spatial(&x);
        Ok(self.graph().push(Op::SumSpatial, &[self], v))
    }

    /// `N x C` to `N x h x w x C`.
    pub fn broadcast_spatial(self, h: usize, w: usize) -> Result<Var<'g, T>> {
        let x = self.value();
        if x.rank() != 2 {
            return Err(Error::shape(
                "broadcast-spatial",
                format!("expected N x C, got {:?}", x.shape()),
            ));
        }
        let v = k::broadcast_spatial(&x, h, w);
        Ok(self.graph().push(Op::BroadcastSpatial { h, w }, &[self], v))
    }

    pub fn sum_to_last(self) -> Var<'g, T> {
        let v = k::sum_to_last(&self.value());
        self.graph().push(Op::SumToLast, &[self], v)
    }

    pub fn broadcast_last(self, shape: &[usize]) -> Result<Var<'g, T>> {
        let b = self.value();
        if b.rank() != 1 || shape.last() != Some(&b.len()) {
            return Err(Error::shape(
                "broadcast-last",
                format!("cannot broadcast {:?} to {shape:?}", b.shape()),
            ));
        }
        let v = k::broadcast_last(&b, shape);
        Ok(self.graph().push(
            Op::BroadcastLast {
                shape: shape.to_vec(),
            },
            &[self],
            v,
        ))
    }

    /// Adds a per-channel bias `b` (length C) to every position.
    pub fn add_bias(self, bias: Var<'g, T>) -> Result<Var<'g, T>> {
        let shape = self.shape();
        self.add(bias.broadcast_last(&shape)?)
    }

    /// Sums each sample: `N x ...` to `N`.
    pub fn sum_per_sample(self) -> Var<'g, T> {
        let v = k::sum_per_sample(&self.value());
        self.graph().push(Op::SumPerSample, &[self], v)
    }

    pub fn broadcast_per_sample(self, shape: &[usize]) -> Result<Var<'g, T>> {
        let v = self.value();
        if v.rank() != 1 || shape.first() != Some(&v.len()) {
            return Err(Error::shape(
                "broadcast-per-sample",
                format!("cannot broadcast {:?} to {shape:?}", v.shape()),
            ));
        }
        let out = k::broadcast_per_sample(&v, shape);
        Ok(self.graph().push(
            Op::BroadcastPerSample {
                shape: shape.to_vec(),
            },
            &[self],
            out,
        ))
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'g, T>> {
        let v = (*self.value()).clone().reshape(shape)?;
        Ok(self.graph().push(
            Op::Reshape {
                shape: shape.to_vec(),
            },
            &[self],
            v,
        ))
    }

    /// Sum of every element, as a one-element tensor.
    pub fn reduce_sum(self) -> Var<'g, T> {
        let n = self.value().len();
        self.reshape(&[1, n])
            .expect("flattening preserves length")
            .sum_per_sample()
    }

    pub fn reduce_mean(self) -> Var<'g, T> {
        let n = self.value().len();
        self.reduce_sum().scale(1.0 / n as f64)
    }

    /// Per-sample sum of squares: `N x ...` to `N`.
    pub fn sum_of_squares(self) -> Var<'g, T> {
        self.square().sum_per_sample()
    }

    /// Spatial mean per channel: `N x H x W x C` to `N x C`.
    pub fn channel_mean(self) -> Result<Var<'g, T>> {
        let [_, h, w, _] = self.value().nhwc("channel-mean")?;
        Ok(self.sum_spatial()?.scale(1.0 / (h * w) as f64))
    }

    /// Spatial standard deviation per channel, `sqrt(var + eps)`.
    pub fn channel_std(self, eps: f64) -> Result<Var<'g, T>> {
        let [_, h, w, _] = self.value().nhwc("channel-std")?;
        let centered = self.sub(self.channel_mean()?.broadcast_spatial(h, w)?)?;
        Ok(centered.square().channel_mean()?.add_scalar(eps).sqrt())
    }

    /// Per-channel spatial standardization `(w - mean) / std`.
    pub fn instance_normalize(self, eps: f64) -> Result<Var<'g, T>> {
        let [_, h, w, _] = self.value().nhwc("instance-normalize")?;
        let centered = self.sub(self.channel_mean()?.broadcast_spatial(h, w)?)?;
        let std = centered
            .square()
            .channel_mean()?
            .add_scalar(eps)
            .sqrt()
            .broadcast_spatial(h, w)?;
        centered.div(std)
    }

    /// Standardizes each sample over all of its non-batch entries.
    pub fn layer_normalize(self, eps: f64) -> Result<Var<'g, T>> {
        let shape = self.shape();
        let per = (shape.iter().product::<usize>() / shape[0]) as f64;
        let mean = self.sum_per_sample().scale(1.0 / per);
        let centered = self.sub(mean.broadcast_per_sample(&shape)?)?;
        let std = centered
            .square()
            .sum_per_sample()
            .scale(1.0 / per)
            .add_scalar(eps)
            .sqrt()
            .broadcast_per_sample(&shape)?;
        centered.div(std)
    }

    /// `op(x) W + b` for `x` of shape `N x F`.
    pub fn dense(self, weight: Var<'g, T>, bias: Option<Var<'g, T>>) -> Result<Var<'g, T>> {
        let y = self.matmul(weight, false, false)?;
        match bias {
            Some(b) => y.add_bias(b),
            None => Ok(y),
        }
    }

    /// Convolution with `n x n` kernel; reflective padding of width 1 when
    /// `n > 1`, so stride-1 convolutions preserve the spatial extent.
    pub fn conv2d(
        self,
        kernel: Var<'g, T>,
        bias: Option<Var<'g, T>>,
        stride: usize,
    ) -> Result<Var<'g, T>> {
        let n = kernel.value().shape()[0];
        let input = match n {
            1 => self,
            3 => self.reflect_pad(1)?,
            other => {
                return Err(Error::shape(
                    "conv2d",
                    format!("kernel size must be 1 or 3, got {other}"),
                ))
            }
        };
        let y = input.conv2d_valid(kernel, stride)?;
        match bias {
            Some(b) => y.add_bias(b),
            None => Ok(y),
        }
    }
}

fn some<'g, T>(v: Var<'g, T>) -> Option<Var<'g, T>> {
    Some(v)
}

/// Vector-Jacobian products of `op` for the inputs flagged in `needs`.
pub(crate) fn vjp<'g, T: Scalar>(
    op: &Op,
    inputs: &[Var<'g, T>],
    out: Var<'g, T>,
    g: Var<'g, T>,
    needs: &[bool],
) -> Result<Vec<Option<Var<'g, T>>>> {
    let want = |i: usize| needs.get(i).copied().unwrap_or(false);
    Ok(match op {
        Op::Leaf | Op::Constant => vec![],
        Op::Add => vec![some(g), some(g)],
        Op::Sub => vec![some(g), want(1).then(|| g.neg())],
        Op::Mul => {
            let (a, b) = (inputs[0], inputs[1]);
            vec![
                if want(0) { Some(g.mul(b)?) } else { None },
                if want(1) { Some(g.mul(a)?) } else { None },
            ]
        }
        Op::Div => {
            let b = inputs[1];
            vec![
                if want(0) { Some(g.div(b)?) } else { None },
                if want(1) {
                    Some(g.mul(out)?.div(b)?.neg())
                } else {
                    None
                },
            ]
        }
        Op::Scale { factor } => vec![some(g.scale(*factor))],
        Op::AddScalar { .. } => vec![some(g)],
        Op::Sqrt => vec![some(g.div(out)?.scale(0.5))],
        Op::LeakyRelu { slope } => vec![some(g.leaky_mask(inputs[0], *slope)?)],
        // The mask is piecewise constant in its second argument.
        Op::LeakyMask { slope } => vec![some(g.leaky_mask(inputs[1], *slope)?), None],
        Op::Conv2d { stride } => {
            let (x, w) = (inputs[0], inputs[1]);
            let xs = x.shape();
            let ws = w.shape();
            vec![
                want(0).then(|| g.conv2d_backward_data(w, *stride, xs[1], xs[2])),
                want(1).then(|| x.conv2d_backward_filter(g, *stride, ws[0], ws[1])),
            ]
        }
        Op::Conv2dBackwardData { stride, .. } => {
            // out = A_w^T gy ; linear in each argument.
            let (gy, w) = (inputs[0], inputs[1]);
            let ws = w.shape();
            vec![
                if want(0) { Some(g.conv2d_valid(w, *stride)?) } else { None },
                want(1).then(|| g.conv2d_backward_filter(gy, *stride, ws[0], ws[1])),
            ]
        }
        Op::Conv2dBackwardFilter { stride, .. } => {
            let (x, gy) = (inputs[0], inputs[1]);
            let xs = x.shape();
            vec![
                want(0).then(|| gy.conv2d_backward_data(g, *stride, xs[1], xs[2])),
                if want(1) { Some(x.conv2d_valid(g, *stride)?) } else { None },
            ]
        }
        Op::ReflectPad { width } => vec![some(g.reflect_pad_adjoint(*width))],
        Op::ReflectPadAdjoint { width } => vec![some(g.reflect_pad(*width)?)],
        Op::MatMul { ta, tb } => {
            let (a, b) = (inputs[0], inputs[1]);
            let ga = if want(0) {
                Some(if *ta {
                    b.matmul(g, *tb, true)?
                } else {
                    g.matmul(b, false, !*tb)?
                })
            } else {
                None
            };
            let gb = if want(1) {
                Some(if *tb {
                    g.matmul(a, true, *ta)?
                } else {
                    a.matmul(g, !*ta, false)?
                })
            } else {
                None
            };
            vec![ga, gb]
        }
        Op::ConcatChannels => {
            let ca = inputs[0].shape()[3];
            let cb = inputs[1].shape()[3];
            vec![
                if want(0) { Some(g.slice_channels(0, ca)?) } else { None },
                if want(1) { Some(g.slice_channels(ca, cb)?) } else { None },
            ]
        }
        Op::SliceChannels { start, len } => {
            let x = inputs[0].shape();
            let c = x[3];
            let mut parts: Vec<Var<'g, T>> = Vec::new();
            let zeros = |ch: usize| {
                g.graph()
                    .constant(Tensor::zeros(&[x[0], x[1], x[2], ch]))
            };
            if *start > 0 {
                parts.push(zeros(*start));
            }
            parts.push(g);
            if start + len < c {
                parts.push(zeros(c - start - len));
            }
            let mut acc = parts[0];
            for p in &parts[1..] {
                acc = acc.concat_channels(*p)?;
            }
            vec![some(acc)]
        }
        Op::AvgPool2 => vec![some(g.upsample2()?.scale(0.25))],
        Op::Upsample2 => vec![some(g.avg_pool2()?.scale(4.0))],
        Op::SumSpatial => {
            let x = inputs[0].shape();
            vec![some(g.broadcast_spatial(x[1], x[2])?)]
        }
        Op::BroadcastSpatial { .. } => vec![some(g.sum_spatial()?)],
        Op::SumToLast => vec![some(g.broadcast_last(&inputs[0].shape())?)],
        Op::BroadcastLast { .. } => vec![some(g.sum_to_last())],
        Op::SumPerSample => vec![some(g.broadcast_per_sample(&inputs[0].shape())?)],
        Op::BroadcastPerSample { .. } => vec![some(g.sum_per_sample())],
        Op::Reshape { .. } => vec![some(g.reshape(&inputs[0].shape())?)],
    })
}
