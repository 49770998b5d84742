use serde::{Deserialize, Serialize};

use super::blocks::{ConvLayer, DownBlock, NormKind, ResBlock, UpBlock};
use super::params::{Bound, ParamSpec, ParamStore};
use crate::autograd::{Graph, Mode, Scalar, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// U-Net generator hyper-parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub height: usize,
    pub width: usize,
    /// Channels of the measurement `y`.
    #[serde(default = "one")]
    pub in_channels: usize,
    /// Channels of the inferred field `x`.
    #[serde(default = "one")]
    pub out_channels: usize,
    pub channels: usize,
    pub latent_dim: usize,
    pub depth: usize,
    #[serde(default)]
    pub cin_skip_first_up: bool,
    pub leaky_slope: f64,
}

fn one() -> usize {
    1
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 || self.channels < 1 || self.latent_dim < 1 {
            return Err(Error::invalid(
                "generator needs depth >= 1, channels >= 1 and latent_dim >= 1",
            ));
        }
        if self.in_channels < 1 || self.out_channels < 1 {
            return Err(Error::invalid("generator channel counts must be positive"));
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

    /// Channel count at contracting level `l` (0 is full resolution).
    pub fn level_channels(&self, l: usize) -> usize {
        self.channels << l
    }
}

/// One concatenation in the expanding path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SkipJoin {
    pub level: usize,
    pub up_channels: usize,
    pub tap_channels: usize,
    pub conv_in_channels: usize,
}

/// The generator network: structure fixed at construction.
#[derive(Clone, Debug)]
pub struct Generator {
    cfg: GeneratorConfig,
    stem: ConvLayer,
    stem_res: ResBlock,
    down: Vec<(DownBlock, ResBlock)>,
    bottom: (UpBlock, ResBlock),
    up: Vec<(UpBlock, ResBlock)>,
    head: ConvLayer,
}

impl Generator {
    pub fn new(cfg: GeneratorConfig) -> Result<Self> {
        cfg.validate()?;
        let (nz, s) = (cfg.latent_dim, cfg.leaky_slope);
        let c = |l| cfg.level_channels(l);
        let stem = ConvLayer::new("stem/conv", 3, cfg.in_channels, c(0));
        let stem_res = ResBlock::new("stem/res", c(0), NormKind::None, nz, s);
        let down = (1..=cfg.depth)
            .map(|l| {
                (
                    DownBlock::new(&format!("down{l}/down"), c(l - 1), 2, NormKind::Cin, nz, s),
                    ResBlock::new(&format!("down{l}/res"), c(l), NormKind::Cin, nz, s),
                )
            })
            .collect();
        let d = cfg.depth;
        let bottom_norm = if cfg.cin_skip_first_up {
            NormKind::None
        } else {
            NormKind::Cin
        };
        let bottom = (
            UpBlock {
                norm: bottom_norm.site("bottom/up/norm".into(), nz, c(d)),
                upsample: false,
                skip_channels: None,
                conv: ConvLayer::new("bottom/up/conv", 3, c(d), c(d)),
                slope: s,
            },
            ResBlock::new("bottom/res", c(d), NormKind::Cin, nz, s),
        );
        let up = (1..=d)
            .rev()
            .map(|l| {
                (
                    UpBlock {
                        norm: NormKind::Cin.site(format!("up{l}/up/norm"), nz, c(l)),
                        upsample: true,
                        skip_channels: Some(c(l - 1)),
                        conv: ConvLayer::new(format!("up{l}/up/conv"), 3, c(l) + c(l - 1), c(l - 1)),
                        slope: s,
                    },
                    ResBlock::new(&format!("up{l}/res"), c(l - 1), NormKind::Cin, nz, s),
                )
            })
            .collect();
        let head = ConvLayer::new("head/conv", 1, c(0), cfg.out_channels);
        Ok(Generator {
            cfg,
            stem,
            stem_res,
            down,
            bottom,
            up,
            head,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
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
        v.extend(self.bottom.0.specs());
        v.extend(self.bottom.1.specs());
        for (u, r) in &self.up {
            v.extend(u.specs());
            v.extend(r.specs());
        }
        v.extend(self.head.specs(s));
        v
    }

    pub fn init_params<T: Scalar>(&self, rng: &mut Rng) -> ParamStore<T> {
        ParamStore::init(&self.param_specs(), rng)
    }

    /// Channel bookkeeping of every skip concatenation, outermost last.
    pub fn skip_plan(&self) -> Vec<SkipJoin> {
        self.up
            .iter()
            .zip((1..=self.cfg.depth).rev())
            .map(|((u, _), l)| {
                let tap = u.skip_channels.unwrap_or(0);
                SkipJoin {
                    level: l,
                    up_channels: self.cfg.level_channels(l),
                    tap_channels: tap,
                    conv_in_channels: u.conv.in_channels,
                }
            })
            .collect()
    }

    pub fn cin_site_count(&self) -> usize {
        self.param_specs()
            .iter()
            .filter(|p| p.path.ends_with("alpha/kernel"))
            .count()
    }

    /// `z`: `N x N_z`; `y`: `N x H x W x C_in`. Returns `N x H x W x C_out`.
    pub fn forward<'g, T: Scalar>(
        &self,
        p: &Bound<'g, T>,
        z: Var<'g, T>,
        y: Var<'g, T>,
    ) -> Result<Var<'g, T>> {
        let cfg = &self.cfg;
        let ys = y.shape();
        if ys.len() != 4 || ys[1] != cfg.height || ys[2] != cfg.width || ys[3] != cfg.in_channels {
            return Err(Error::shape(
                "generator",
                format!(
                    "measurement {ys:?} does not match N x {} x {} x {}",
                    cfg.height, cfg.width, cfg.in_channels
                ),
            ));
        }
        let zs = z.shape();
        if zs.len() != 2 || zs[0] != ys[0] || zs[1] != cfg.latent_dim {
            return Err(Error::shape(
                "generator",
                format!("latent {zs:?} does not match {} x {}", ys[0], cfg.latent_dim),
            ));
        }
        let z = Some(z);
        let mut w = self.stem.apply(p, y)?;
        w = self.stem_res.apply(p, w, None)?;
        let mut taps = vec![w];
        for (down, res) in &self.down {
            w = down.apply(p, w, z)?;
            w = res.apply(p, w, z)?;
            taps.push(w);
        }
        taps.pop();
        w = self.bottom.0.apply(p, w, None, z)?;
        w = self.bottom.1.apply(p, w, z)?;
        for (up, res) in &self.up {
            let tap = taps.pop().expect("one tap per level");
            w = up.apply(p, w, Some(tap), z)?;
            w = res.apply(p, w, z)?;
        }
        self.head.apply(p, w.leaky_relu(cfg.leaky_slope))
    }

    /// Evaluates without recording gradients.
    pub fn sample<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        z: &Tensor<T>,
        y: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let g = Graph::new(Mode::NoGrad);
        let p = params.bind(&g, false);
        let out = self.forward(&p, g.constant(z.clone()), g.constant(y.clone()))?;
        Ok((*out.value()).clone())
    }
}
