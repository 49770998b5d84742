//! Building blocks shared by the generator and the critic.

use super::params::{Bound, Init, ParamSpec};
use crate::autograd::{Scalar, Var};
use crate::error::{Error, Result};

/// Stabilizer added to variances before taking square roots.
pub const NORM_EPS: f64 = 1e-5;

/// Conv(n, 1, k) with bias. `n = 3` convolutions are reflect-padded.
#[derive(Clone, Debug)]
pub struct ConvLayer {
    pub path: String,
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvLayer {
    pub fn new(path: impl Into<String>, kernel: usize, in_channels: usize, out_channels: usize) -> Self {
        ConvLayer {
            path: path.into(),
            kernel,
            in_channels,
            out_channels,
        }
    }

    pub fn specs(&self, slope: f64) -> Vec<ParamSpec> {
        let fan_in = (self.kernel * self.kernel * self.in_channels) as f64;
        let std = (2.0 / ((1.0 + slope * slope) * fan_in)).sqrt();
        vec![
            ParamSpec::new(
                format!("{}/kernel", self.path),
                &[self.kernel, self.kernel, self.in_channels, self.out_channels],
                Init::Normal(std),
            ),
            ParamSpec::new(format!("{}/bias", self.path), &[self.out_channels], Init::Zeros),
        ]
    }

    pub fn apply<'g, T: Scalar>(&self, p: &Bound<'g, T>, x: Var<'g, T>) -> Result<Var<'g, T>> {
        let k = p.get(&format!("{}/kernel", self.path))?;
        let b = p.get(&format!("{}/bias", self.path))?;
        x.conv2d(k, Some(b), 1)
    }
}

/// A conditional-instance-normalization site with `channels` outputs.
#[derive(Clone, Debug)]
pub struct CinSite {
    pub path: String,
    pub latent_dim: usize,
    pub channels: usize,
}

impl CinSite {
    pub fn specs(&self) -> Vec<ParamSpec> {
        let std = 1.0 / (self.latent_dim as f64).sqrt();
        let (nz, c) = (self.latent_dim, self.channels);
        vec![
            ParamSpec::new(format!("{}/alpha/kernel", self.path), &[1, 1, nz, c], Init::Normal(std)),
            ParamSpec::new(format!("{}/alpha/bias", self.path), &[c], Init::Constant(1.0)),
            ParamSpec::new(format!("{}/beta/kernel", self.path), &[1, 1, nz, c], Init::Normal(std)),
            ParamSpec::new(format!("{}/beta/bias", self.path), &[c], Init::Zeros),
        ]
    }

    pub fn apply<'g, T: Scalar>(
        &self,
        p: &Bound<'g, T>,
        w: Var<'g, T>,
        z: Var<'g, T>,
    ) -> Result<Var<'g, T>> {
        let get = |s: &str| p.get(&format!("{}/{s}", self.path));
        cin(
            w,
            z,
            (get("alpha/kernel")?, get("alpha/bias")?),
            (get("beta/kernel")?, get("beta/bias")?),
        )
    }
}

/// Conditional instance normalization of `w` (`N x H' x W' x C'`) by latent
/// `z` (`N x N_z`): each channel is standardized over space, then scaled by
/// `alpha(z)` and shifted by `beta(z)`. `alpha` and `beta` are 1x1
/// convolutions over `z` viewed as a `1 x 1 x N_z` image, given as
/// `(kernel, bias)` pairs.
pub fn cin<'g, T: Scalar>(
    w: Var<'g, T>,
    z: Var<'g, T>,
    alpha: (Var<'g, T>, Var<'g, T>),
    beta: (Var<'g, T>, Var<'g, T>),
) -> Result<Var<'g, T>> {
    let [n, h, wd, c] = w.value().nhwc("cin")?;
    let zs = z.shape();
    if zs.len() != 2 || zs[0] != n {
        return Err(Error::shape(
            "cin",
            format!("latent must be N x N_z with N = {n}, got {zs:?}"),
        ));
    }
    for (name, (k, _)) in [("alpha", alpha), ("beta", beta)] {
        let ks = k.shape();
        if ks.len() != 4 || ks[3] != c || ks[2] != zs[1] {
            return Err(Error::shape(
                "cin",
                format!("{name} map {ks:?} does not take N_z = {} to C' = {c}", zs[1]),
            ));
        }
    }
    let z_img = z.reshape(&[n, 1, 1, zs[1]])?;
    let affine = |(k, b): (Var<'g, T>, Var<'g, T>)| -> Result<Var<'g, T>> {
        z_img
            .conv2d(k, Some(b), 1)?
            .reshape(&[n, c])?
            .broadcast_spatial(h, wd)
    };
    let a = affine(alpha)?;
    let b = affine(beta)?;
    w.instance_normalize(NORM_EPS)?.mul(a)?.add(b)
}

/// Normalization used inside a block.
#[derive(Clone, Debug)]
pub enum Norm {
    Cin(CinSite),
    Layer,
    None,
}

impl Norm {
    pub fn specs(&self) -> Vec<ParamSpec> {
        match self {
            Norm::Cin(site) => site.specs(),
            _ => Vec::new(),
        }
    }

    pub fn apply<'g, T: Scalar>(
        &self,
        p: &Bound<'g, T>,
        w: Var<'g, T>,
        z: Option<Var<'g, T>>,
    ) -> Result<Var<'g, T>> {
        match self {
            Norm::Cin(site) => {
                let z = z.ok_or_else(|| {
                    Error::invalid(format!("CIN site `{}` requires a latent input", site.path))
                })?;
                site.apply(p, w, z)
            }
            Norm::Layer => w.layer_normalize(NORM_EPS),
            Norm::None => Ok(w),
        }
    }

    pub fn is_cin(&self) -> bool {
        matches!(self, Norm::Cin(_))
    }
}

/// Which normalization a block should use; resolved into [`Norm`] per site.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    Cin,
    Layer,
    None,
}

impl NormKind {
    pub fn site(self, path: String, latent_dim: usize, channels: usize) -> Norm {
        match self {
            NormKind::Cin => Norm::Cin(CinSite {
                path,
                latent_dim,
                channels,
            }),
            NormKind::Layer => Norm::Layer,
            NormKind::None => Norm::None,
        }
    }
}

/// `w + F(w)` with `F = conv . act . norm . conv . act . norm`, shape-preserving.
#[derive(Clone, Debug)]
pub struct ResBlock {
    pub norm1: Norm,
    pub conv1: ConvLayer,
    pub norm2: Norm,
    pub conv2: ConvLayer,
    pub slope: f64,
}

impl ResBlock {
    pub fn new(path: &str, channels: usize, norm: NormKind, latent_dim: usize, slope: f64) -> Self {
        ResBlock {
            norm1: norm.site(format!("{path}/norm1"), latent_dim, channels),
            conv1: ConvLayer::new(format!("{path}/conv1"), 3, channels, channels),
            norm2: norm.site(format!("{path}/norm2"), latent_dim, channels),
            conv2: ConvLayer::new(format!("{path}/conv2"), 3, channels, channels),
            slope,
        }
    }

    pub fn specs(&self) -> Vec<ParamSpec> {
        let mut v = self.norm1.specs();
        v.extend(self.conv1.specs(self.slope));
        v.extend(self.norm2.specs());
        v.extend(self.conv2.specs(self.slope));
        v
    }

    pub fn apply<'g, T: Scalar>(
        &self,
        p: &Bound<'g, T>,
        w: Var<'g, T>,
        z: Option<Var<'g, T>>,
    ) -> Result<Var<'g, T>> {
        let h = self.norm1.apply(p, w, z)?.leaky_relu(self.slope);
        let h = self.conv1.apply(p, h)?;
        let h = self.norm2.apply(p, h, z)?.leaky_relu(self.slope);
        let h = self.conv2.apply(p, h)?;
        w.add(h)
    }
}

/// Down(k): norm, activation, 2x2 average pooling, then Conv(3, 1, k C').
#[derive(Clone, Debug)]
pub struct DownBlock {
    pub norm: Norm,
    pub conv: ConvLayer,
    pub slope: f64,
}

impl DownBlock {
    pub fn new(
        path: &str,
        in_channels: usize,
        factor: usize,
        norm: NormKind,
        latent_dim: usize,
        slope: f64,
    ) -> Self {
        DownBlock {
            norm: norm.site(format!("{path}/norm"), latent_dim, in_channels),
            conv: ConvLayer::new(format!("{path}/conv"), 3, in_channels, in_channels * factor),
            slope,
        }
    }

    pub fn specs(&self) -> Vec<ParamSpec> {
        let mut v = self.norm.specs();
        v.extend(self.conv.specs(self.slope));
        v
    }

    pub fn apply<'g, T: Scalar>(
        &self,
        p: &Bound<'g, T>,
        w: Var<'g, T>,
        z: Option<Var<'g, T>>,
    ) -> Result<Var<'g, T>> {
        let h = self.norm.apply(p, w, z)?.leaky_relu(self.slope).avg_pool2()?;
        self.conv.apply(p, h)
    }
}

/// Up(k): norm, activation, optional 2x nearest-neighbour upsampling,
/// optional concatenation with a skip tensor, then a 3x3 convolution to
/// `C'/k` channels.
#[derive(Clone, Debug)]
pub struct UpBlock {
    pub norm: Norm,
    pub upsample: bool,
    pub skip_channels: Option<usize>,
    pub conv: ConvLayer,
    pub slope: f64,
}

impl UpBlock {
    pub fn specs(&self) -> Vec<ParamSpec> {
        let mut v = self.norm.specs();
        v.extend(self.conv.specs(self.slope));
        v
    }

    pub fn apply<'g, T: Scalar>(
        &self,
        p: &Bound<'g, T>,
        w: Var<'g, T>,
        skip: Option<Var<'g, T>>,
        z: Option<Var<'g, T>>,
    ) -> Result<Var<'g, T>> {
        let mut h = self.norm.apply(p, w, z)?.leaky_relu(self.slope);
        if self.upsample {
            h = h.upsample2()?;
        }
        match (self.skip_channels, skip) {
            (Some(c), Some(s)) => {
                let got = s.shape()[3];
                if got != c {
                    return Err(Error::shape(
                        "up-block",
                        format!("skip tensor has {got} channels, block expects {c}"),
                    ));
                }
                h = h.concat_channels(s)?;
            }
            (None, None) => {}
            _ => {
                return Err(Error::invalid(format!(
                    "up block `{}`: skip connection presence does not match its definition",
                    self.conv.path
                )))
            }
        }
        self.conv.apply(p, h)
    }
}

/// Dense(k) with bias on `N x F` inputs.
#[derive(Clone, Debug)]
pub struct DenseLayer {
    pub path: String,
    pub in_features: usize,
    pub out_features: usize,
}

impl DenseLayer {
    pub fn specs(&self, slope: f64) -> Vec<ParamSpec> {
        let std = (2.0 / ((1.0 + slope * slope) * self.in_features as f64)).sqrt();
        vec![
            ParamSpec::new(
                format!("{}/weight", self.path),
                &[self.in_features, self.out_features],
                Init::Normal(std),
            ),
            ParamSpec::new(format!("{}/bias", self.path), &[self.out_features], Init::Zeros),
        ]
    }

    pub fn apply<'g, T: Scalar>(&self, p: &Bound<'g, T>, x: Var<'g, T>) -> Result<Var<'g, T>> {
        let w = p.get(&format!("{}/weight", self.path))?;
        let b = p.get(&format!("{}/bias", self.path))?;
        x.dense(w, Some(b))
    }
}
