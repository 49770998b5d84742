use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::pairwise_sum;
use crate::data::{ForwardSpec, PriorSpec};
use crate::error::{Error, Result};
use crate::pde::{heat_forward_fd_modal, Field};
use crate::rng::{stream, Rng};

/// Self-normalized importance-sampling estimate of the posterior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    #[serde(skip)]
    pub mean: Vec<f64>,
    #[serde(skip)]
    pub sd: Vec<f64>,
    pub draws: usize,
    /// Effective sample size `(sum w)^2 / sum w^2`.
    pub ess: f64,
}

/// Importance sampling with the prior as proposal and a Gaussian likelihood.
///
/// Draw `i` uses the stream `(seed, "oracle", i)`. `sample` maps a stream to
/// an inferred field `x`; `forward` maps `x` to the clean measurement. Fails
/// when the effective sample size falls below `ess_floor`.
pub fn importance_oracle<S, F>(
    y: &[f64],
    sigma: f64,
    draws: usize,
    ess_floor: f64,
    seed: u64,
    sample: S,
    forward: F,
) -> Result<OracleSummary>
where
    S: Fn(&mut Rng) -> Result<Vec<f64>> + Sync,
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if draws < 1 || !(sigma > 0.0) {
        return Err(Error::invalid(format!(
            "importance sampling needs draws >= 1 and sigma > 0, got {draws}, {sigma}"
        )));
    }
    let evaluated: Vec<(Vec<f64>, f64)> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "oracle", i as u64);
            let x = sample(&mut rng)?;
            let fx = forward(&x)?;
            if fx.len() != y.len() {
                return Err(Error::shape("importance-oracle", "forward output and measurement differ in size"));
            }
            let misfit: Vec<f64> = fx.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).collect();
            Ok((x, -pairwise_sum(&misfit) / (2.0 * sigma * sigma)))
        })
        .collect::<Result<_>>()?;
    let top = evaluated.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = evaluated.iter().map(|e| (e.1 - top).exp()).collect();
    let sw = pairwise_sum(&w);
    let ess = sw * sw / pairwise_sum(&w.iter().map(|v| v * v).collect::<Vec<_>>());
    if ess < ess_floor {
        return Err(Error::invalid(format!(
            "effective sample size {ess:.1} is below the floor {ess_floor}; increase the number of draws"
        )));
    }
    let nodes = evaluated[0].0.len();
    let mut mean = Vec::with_capacity(nodes);
    let mut sd = Vec::with_capacity(nodes);
    let mut terms = vec![0.0; draws];
    for p in 0..nodes {
        for (t, (e, wi)) in terms.iter_mut().zip(evaluated.iter().zip(&w)) {
            *t = wi * e.0[p];
        }
        let m = pairwise_sum(&terms) / sw;
        for (t, (e, wi)) in terms.iter_mut().zip(evaluated.iter().zip(&w)) {
            *t = wi * (e.0[p] - m).powi(2);
        }
        mean.push(m);
        sd.push((pairwise_sum(&terms) / sw).sqrt());
    }
    Ok(OracleSummary { mean, sd, draws, ess })
}

/// Reference posterior for a measurement from a procedural prior, sampling
/// its shape parameters directly.
///
/// Heat measurements use the eigenbasis form of the implicit-Euler scheme,
/// which matches the data-generating solver to its tolerance.
pub fn reference_posterior(
    y: &Field,
    prior: &PriorSpec,
    forward: &ForwardSpec,
    sigma: f64,
    draws: usize,
    ess_floor: f64,
    seed: u64,
) -> Result<OracleSummary> {
    prior.validate()?;
    let grid = y.grid;
    importance_oracle(
        &y.values,
        sigma,
        draws,
        ess_floor,
        seed,
        |rng| Ok(prior.rasterize(&prior.draw_params(rng)?, &grid)?.values),
        |x| {
            let f = Field::new(grid, x.to_vec())?;
            Ok(match forward {
                ForwardSpec::Heat(cfg) => heat_forward_fd_modal(&f, cfg)?,
                other => other.solve(&f)?,
            }
            .values)
        },
    )
}
