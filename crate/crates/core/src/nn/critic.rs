use serde::{Deserialize, Serialize};

use super::blocks::{ConvLayer, DenseLayer, DownBlock, NormKind, ResBlock};
use super::params::{Bound, ParamSpec, ParamStore};
use crate::autograd::{Graph, Mode, Scalar, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Critic hyper-parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticConfig {
    pub height: usize,
    pub width: usize,
    #[serde(default = "one")]
    pub x_channels: usize,
    #[serde(default = "one")]
    pub y_channels: usize,
    pub channels: usize,
    pub depth: usize,
    pub leaky_slope: f64,
    /// Hidden widths of the dense head; a final width-1 layer is appended.
    #[serde(default)]
    pub dense_widths: Vec<usize>,
}

fn one() -> usize {
    1
}

impl CriticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels < 1 || self.x_channels < 1 || self.y_channels < 1 {
            return Err(Error::invalid("critic channel counts must be positive"));
        }
        if self.dense_widths.contains(&0) {
            return Err(Error::invalid("critic dense widths must be positive"));
        }
        let m = 1usize << self.depth;
        if self.height % m != 0 || self.width % m != 0 {
            return Err(Error::invalid(format!(
                "grid {}x{} is not divisible by 2^depth = {m}",
                self.height, self.width
            )));
        }
        if self.height / m < 2 || self.width / m < 2 {
            return Err(Error::invalid(format!(
                "grid {}x{} is too small for depth {}: the coarsest level must be at least 2x2",
                self.height, self.width, self.depth
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Critic {
    cfg: CriticConfig,
    stem: ConvLayer,
    stem_res: ResBlock,
    down: Vec<(DownBlock, ResBlock)>,
    dense: Vec<DenseLayer>,
}

/// Path of the final width-1 dense layer.
pub const CRITIC_OUTPUT: &str = "head/out";

impl Critic {
    pub fn new(cfg: CriticConfig) -> Result<Self> {
        cfg.validate()?;
        let s = cfg.leaky_slope;
        let c = |l: usize| cfg.channels << l;
        let stem = ConvLayer::new("stem/conv", 3, cfg.x_channels + cfg.y_channels, c(0));
        let stem_res = ResBlock::new("stem/res", c(0), NormKind::None, 0, s);
        let down = (1..=cfg.depth)
            .map(|l| {
                (
                    DownBlock::new(&format!("down{l}/down"), c(l - 1), 2, NormKind::Layer, 0, s),
                    ResBlock::new(&format!("down{l}/res"), c(l), NormKind::Layer, 0, s),
                )
            })
            .collect();
        let d = cfg.depth;
        let mut features = (cfg.height >> d) * (cfg.width >> d) * c(d);
        let mut dense = Vec::new();
        for (i, &width) in cfg.dense_widths.iter().enumerate() {
            dense.push(DenseLayer {
                path: format!("head/dense{i}"),
                in_features: features,
                out_features: width,
            });
            features = width;
        }
        dense.push(DenseLayer {
            path: CRITIC_OUTPUT.into(),
            in_features: features,
            out_features: 1,
        });
        Ok(Critic {
            cfg,
            stem,
            stem_res,
            down,
            dense,
        })
    }

    pub fn config(&self) -> &CriticConfig {
        &self.cfg
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let s = self.cfg.leaky_slope;
        let mut v = self.stem.specs(s);
        v.extend(self.stem_res.specs());
        for (d, r) in &self.down {
            v.extend(d.specs());
            v.extend(r.specs());
        }
        for l in &self.dense {
            v.extend(l.specs(s));
        }
        v
    }

    pub fn init_params<T: Scalar>(&self, rng: &mut Rng) -> ParamStore<T> {
        ParamStore::init(&self.param_specs(), rng)
    }

    /// `x`: `N x H x W x C_x`, `y`: `N x H x W x C_y`. Returns one score per sample, shape `[N]`.
    pub fn forward<'g, T: Scalar>(
        &self,
        p: &Bound<'g, T>,
        x: Var<'g, T>,
        y: Var<'g, T>,
    ) -> Result<Var<'g, T>> {
        let cfg = &self.cfg;
        let (xs, ys) = (x.shape(), y.shape());
        let expect = |s: &[usize], c: usize| {
            s.len() == 4 && s[1] == cfg.height && s[2] == cfg.width && s[3] == c
        };
        if !expect(&xs, cfg.x_channels) || !expect(&ys, cfg.y_channels) || xs[0] != ys[0] {
            return Err(Error::shape(
                "critic",
                format!(
                    "inputs x {xs:?} and y {ys:?} do not match N x {} x {} x ({}, {})",
                    cfg.height, cfg.width, cfg.x_channels, cfg.y_channels
                ),
            ));
        }
        let n = xs[0];
        let mut w = self.stem.apply(p, x.concat_channels(y)?)?;
        w = self.stem_res.apply(p, w, None)?;
        for (down, res) in &self.down {
            w = down.apply(p, w, None)?;
            w = res.apply(p, w, None)?;
        }
        let features = w.value().len() / n;
        let mut h = w.reshape(&[n, features])?;
        for layer in &self.dense {
            h = layer.apply(p, h.leaky_relu(cfg.leaky_slope))?;
        }
        h.reshape(&[n])
    }

    /// Scores without recording gradients.
    pub fn score<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        x: &Tensor<T>,
        y: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let g = Graph::new(Mode::NoGrad);
        let p = params.bind(&g, false);
        let out = self.forward(&p, g.constant(x.clone()), g.constant(y.clone()))?;
        Ok((*out.value()).clone())
    }
}
