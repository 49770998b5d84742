//! Adversarial training under the gradient-penalized Wasserstein objective.
//!
//! The critic minimizes `mean(-d(x, y) + d(g(z, y), y)) + lambda *
//! mean((|d_1 d(h, y)| - 1)^2)` at interpolates `h = eps x + (1 - eps) g`,
//! one `eps ~ U(0, 1)` per sample. The penalty's parameter gradient runs
//! through the input gradient, so critic steps record in
//! [`Mode::HigherOrder`](crate::autograd::Mode). Every batch is one critic
//! step; every `n_critic` critic steps are followed by one generator step
//! and one log row.

mod adam;
mod log;
mod loss;
mod trainer;

use serde::{Deserialize, Serialize};

pub use adam::{adam_update, AdamParams, AdamState, ADAM_EPS};
pub use log::{LogRecord, TrainLog, LOG_HEADER};
pub use loss::{critic_terms, generator_loss, interpolate, mix, CriticTerms};
pub use trainer::{Checkpoint, CheckpointMeta, TrainOptions, Trainer, FINAL_CHECKPOINT, LOG_FILE};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gp_lambda: f64,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub batch_size: usize,
    pub n_critic: usize,
    pub epochs: usize,
    pub latent_dim: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gp_lambda: 10.0,
            learning_rate: 1e-3,
            adam_beta1: 0.5,
            adam_beta2: 0.9,
            batch_size: 50,
            n_critic: 4,
            epochs: 200,
            latent_dim: 100,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let betas = [self.adam_beta1, self.adam_beta2];
        if !(self.gp_lambda >= 0.0) {
            return Err(Error::invalid("gp_lambda must be >= 0"));
        }
        if betas.iter().any(|b| !(0.0..1.0).contains(b)) {
            return Err(Error::invalid("adam betas must lie in [0, 1)"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.batch_size < 1 || self.n_critic < 1 || self.latent_dim < 1 {
            return Err(Error::invalid(
                "batch_size, n_critic and latent_dim must be at least 1",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
