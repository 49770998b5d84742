//! Generator and critic networks.
//!
//! The generator is a U-Net: a contracting path of `Down(2)` stages, each
//! followed by a residual block, and an expanding path of `Up(2)` stages that
//! concatenate the matching contracting tap. The latent `z` enters through
//! conditional instance normalization at every normalized site. The critic
//! concatenates `x` and `y`, contracts with layer-normalized blocks and ends in
//! a dense head producing one score per sample.
//!
//! ```
//! use cwgan::nn::{Generator, GeneratorConfig};
//! use cwgan::autograd::Tensor;
//!
//! let g = Generator::new(GeneratorConfig {
//!     height: 8, width: 8, in_channels: 1, out_channels: 1,
//!     channels: 2, latent_dim: 3, depth: 1,
//!     cin_skip_first_up: false, leaky_slope: 0.1,
//! }).unwrap();
//! let params = g.init_params::<f64>(&mut cwgan::rng::stream(0, "init", 0));
//! let x = g.sample(&params, &Tensor::zeros(&[2, 3]), &Tensor::ones(&[2, 8, 8, 1])).unwrap();
//! assert_eq!(x.shape(), &[2, 8, 8, 1]);
//! ```

mod blocks;
mod critic;
mod generator;
mod params;
mod traits;

pub use blocks::{cin, CinSite, ConvLayer, DenseLayer, DownBlock, Norm, NormKind, ResBlock, UpBlock, NORM_EPS};
pub use critic::{Critic, CriticConfig, CRITIC_OUTPUT};
pub use generator::{Generator, GeneratorConfig, SkipJoin};
pub use traits::{CriticNet, GeneratorNet};
pub use params::{Bound, Init, ParamSpec, ParamStore, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
