use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pde::{fft_regularized_inverse, gaussian_bump, Field, Grid2D, BUMP_SIGMA};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kappa: f64,
    #[serde(default = "one")]
    pub t_final: f64,
    #[serde(default = "modes")]
    pub modes: usize,
    #[serde(default = "sigma")]
    pub sigma: f64,
}

fn one() -> f64 {
    1.0
}
fn modes() -> usize {
    25
}
fn sigma() -> f64 {
    BUMP_SIGMA
}

impl SweepConfig {
    pub fn new(kappa: f64) -> Self {
        SweepConfig { kappa, t_final: one(), modes: modes(), sigma: sigma() }
    }
}

/// For a bump placed at every node `s0`, the backward solution read at each
/// probe. Returns one image per probe, indexed by the bump center.
pub fn bump_sweep(grid: &Grid2D, probes: &[(usize, usize)], cfg: &SweepConfig) -> Result<Vec<Field>> {
    let columns: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|q| {
            let s0 = grid.point(q / grid.n1, q % grid.n1);
            let u0 = fft_regularized_inverse(&gaussian_bump(s0, cfg.sigma, grid)?, cfg.kappa, cfg.t_final, cfg.modes)?;
            Ok(probes.iter().map(|&(i, j)| u0.at(i, j)).collect())
        })
        .collect::<Result<_>>()?;
    (0..probes.len())
        .map(|p| Field::new(*grid, columns.iter().map(|c| c[p]).collect()))
        .collect()
}

/// Mean of `image` over rings of integer-rounded grid distance from `center`.
/// Empty rings are skipped.
pub fn ring_averages(image: &Field, center: (usize, usize)) -> Vec<(usize, f64)> {
    let g = image.grid;
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for i in 0..g.n2 {
        for j in 0..g.n1 {
            let d = ((i as f64 - center.0 as f64).powi(2) + (j as f64 - center.1 as f64).powi(2)).sqrt();
            let r = d.round() as usize;
            if sums.len() <= r {
                sums.resize(r + 1, (0.0, 0));
            }
            sums[r].0 += image.at(i, j);
            sums[r].1 += 1;
        }
    }
    sums.into_iter()
        .enumerate()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(r, (s, n))| (r, s / n as f64))
        .collect()
}

/// Whether ring averages never increase past ring `from`, up to `tol`.
pub fn rings_non_increasing(rings: &[(usize, f64)], from: usize, tol: f64) -> bool {
    let tail: Vec<f64> = rings.iter().filter(|(r, _)| *r >= from).map(|&(_, v)| v).collect();
    tail.windows(2).all(|w| w[1] <= w[0] + tol)
}
