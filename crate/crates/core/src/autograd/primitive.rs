use std::str::FromStr;

use super::graph::Var;
use super::tensor::Scalar;
use crate::error::{Error, Result};

/// The closed kernel set addressable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrimitiveTag {
    Conv2d,
    Dense,
    LeakyRelu,
    Add,
    Subtract,
    ElementwiseMultiply,
    ScalarScale,
    ConcatChannels,
    AvgPool,
    NearestNeighborUpsample,
    ChannelMean,
    ChannelStd,
    LayerNormalize,
    ReduceMean,
    SumOfSquares,
    Sqrt,
}

impl FromStr for PrimitiveTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use PrimitiveTag::*;
        Ok(match s {
            "conv2d" => Conv2d,
            "dense" => Dense,
            "leaky-relu" => LeakyRelu,
            "add" => Add,
            "subtract" => Subtract,
            "elementwise-multiply" => ElementwiseMultiply,
            "scalar-scale" => ScalarScale,
            "concat-channels" => ConcatChannels,
            "avg-pool" => AvgPool,
            "nearest-neighbor-upsample" => NearestNeighborUpsample,
            "channel-mean" => ChannelMean,
            "channel-std" => ChannelStd,
            "layer-normalize" => LayerNormalize,
            "reduce-mean" => ReduceMean,
            "sum-of-squares" => SumOfSquares,
            "sqrt" => Sqrt,
            other => return Err(Error::UnknownOp(other.to_string())),
        })
    }
}

/// Attributes for [`eval_primitive`]. Unused fields are ignored.
#[derive(Clone, Debug)]
pub struct Attrs {
    /// Convolution kernel size `n` (1 or 3).
    pub kernel: usize,
    pub stride: usize,
    /// Convolution filter count `k` or dense width; checked against the kernel.
    pub filters: Option<usize>,
    pub slope: f64,
    pub factor: f64,
    pub eps: f64,
}

impl Default for Attrs {
    fn default() -> Self {
        Attrs {
            kernel: 3,
            stride: 1,
            filters: None,
            slope: 0.1,
            factor: 1.0,
            eps: 1e-5,
        }
    }
}

fn arity(tag: &str, inputs: usize, lo: usize, hi: usize) -> Result<()> {
    if inputs < lo || inputs > hi {
        return Err(Error::invalid(format!(
            "{tag} takes {lo}..={hi} inputs, got {inputs}"
        )));
    }
    Ok(())
}

/// Evaluates the primitive named `tag` on `inputs`, recording it on their graph.
///
/// Input conventions: `conv2d` takes `[x, kernel, bias?]` with the kernel laid
/// out `n x n x Ci x k`; `dense` takes `[x, weight, bias?]` with `x` of shape
/// `N x F` and weight `F x width`.
pub fn eval_primitive<'g, T: Scalar>(
    tag: &str,
    inputs: &[Var<'g, T>],
    attrs: &Attrs,
) -> Result<Var<'g, T>> {
    use PrimitiveTag::*;
    let parsed: PrimitiveTag = tag.parse()?;
    match parsed {
        Conv2d => {
            arity(tag, inputs.len(), 2, 3)?;
            let ks = inputs[1].shape();
            if ks.len() != 4 || ks[0] != attrs.kernel || ks[1] != attrs.kernel {
                return Err(Error::shape(
                    "conv2d",
                    format!("kernel {ks:?} does not match n = {}", attrs.kernel),
                ));
            }
            if let Some(k) = attrs.filters {
                if ks[3] != k {
                    return Err(Error::shape(
                        "conv2d",
                        format!("kernel {ks:?} has {} filters, expected k = {k}", ks[3]),
                    ));
                }
            }
            inputs[0].conv2d(inputs[1], inputs.get(2).copied(), attrs.stride)
        }
        Dense => {
            arity(tag, inputs.len(), 2, 3)?;
            if let Some(k) = attrs.filters {
                let ws = inputs[1].shape();
                if ws.len() != 2 || ws[1] != k {
                    return Err(Error::shape(
                        "dense",
                        format!("weight {ws:?} does not have width {k}"),
                    ));
                }
            }
            inputs[0].dense(inputs[1], inputs.get(2).copied())
        }
        LeakyRelu => {
            arity(tag, inputs.len(), 1, 1)?;
            Ok(inputs[0].leaky_relu(attrs.slope))
        }
        Add => {
            arity(tag, inputs.len(), 2, 2)?;
            inputs[0].add(inputs[1])
        }
        Subtract => {
            arity(tag, inputs.len(), 2, 2)?;
            inputs[0].sub(inputs[1])
        }
        ElementwiseMultiply => {
            arity(tag, inputs.len(), 2, 2)?;
            inputs[0].mul(inputs[1])
        }
        ScalarScale => {
            arity(tag, inputs.len(), 1, 1)?;
            Ok(inputs[0].scale(attrs.factor))
        }
        ConcatChannels => {
            arity(tag, inputs.len(), 2, 2)?;
            inputs[0].concat_channels(inputs[1])
        }
        AvgPool => {
            arity(tag, inputs.len(), 1, 1)?;
            inputs[0].avg_pool2()
        }
        NearestNeighborUpsample => {
            arity(tag, inputs.len(), 1, 1)?;
            inputs[0].upsample2()
        }
        ChannelMean => {
            arity(tag, inputs.len(), 1, 1)?;
            inputs[0].channel_mean()
        }
        ChannelStd => {
            arity(tag, inputs.len(), 1, 1)?;
            inputs[0].channel_std(attrs.eps)
        }
        LayerNormalize => {
            arity(tag, inputs.len(), 1, 1)?;
            inputs[0].layer_normalize(attrs.eps)
        }
        ReduceMean => {
            arity(tag, inputs.len(), 1, 1)?;
            Ok(inputs[0].reduce_mean())
        }
        SumOfSquares => {
            arity(tag, inputs.len(), 1, 1)?;
            Ok(inputs[0].sum_of_squares())
        }
        Sqrt => {
            arity(tag, inputs.len(), 1, 1)?;
            Ok(inputs[0].sqrt())
        }
    }
}
