use super::params::{Bound, ParamSpec};
use super::{Critic, Generator};
use crate::autograd::{Scalar, Var};
use crate::error::Result;

/// A conditional generator `g(z, y)`.
pub trait GeneratorNet {
    fn param_specs(&self) -> Vec<ParamSpec>;
    fn latent_dim(&self) -> usize;
    /// `z`: `N x N_z`, `y`: `N x H x W x C_y`; returns `N x H x W x C_x`.
    fn generate<'g, T: Scalar>(
        &self,
        p: &Bound<'g, T>,
        z: Var<'g, T>,
        y: Var<'g, T>,
    ) -> Result<Var<'g, T>>;
}

/// A conditional critic `d(x, y)` returning one score per sample.
pub trait CriticNet {
    fn param_specs(&self) -> Vec<ParamSpec>;
    fn critique<'g, T: Scalar>(
        &self,
        p: &Bound<'g, T>,
        x: Var<'g, T>,
        y: Var<'g, T>,
    ) -> Result<Var<'g, T>>;
}

impl GeneratorNet for Generator {
    fn param_specs(&self) -> Vec<ParamSpec> {
        Generator::param_specs(self)
    }

    fn latent_dim(&self) -> usize {
        self.config().latent_dim
    }

    fn generate<'g, T: Scalar>(
        &self,
        p: &Bound<'g, T>,
        z: Var<'g, T>,
        y: Var<'g, T>,
    ) -> Result<Var<'g, T>> {
        self.forward(p, z, y)
    }
}

impl CriticNet for Critic {
    fn param_specs(&self) -> Vec<ParamSpec> {
        Critic::param_specs(self)
    }

    fn critique<'g, T: Scalar>(
        &self,
        p: &Bound<'g, T>,
        x: Var<'g, T>,
        y: Var<'g, T>,
    ) -> Result<Var<'g, T>> {
        self.forward(p, x, y)
    }
}
