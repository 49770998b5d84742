use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autograd::{Graph, Mode, Tensor};
use crate::error::{Error, Result};
use crate::nn::{GeneratorNet, ParamStore};
use crate::pde::Field;
use crate::rng::Rng;

/// Monte-Carlo draw count used when none is given.
pub const DEFAULT_DRAWS: usize = 800;
/// Important samples reported by default.
pub const DEFAULT_IMPORTANT: usize = 4;

/// Fixed-order pairwise sum, independent of thread count.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// `K` generated fields for one measurement, stored as columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshots {
    pub nodes: usize,
    pub columns: Vec<Vec<f64>>,
}

impl Snapshots {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Pixel-wise mean and population standard deviation.
    pub fn mean_sd(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.columns.len() as f64;
        let mut col = vec![0.0; self.columns.len()];
        let mut mean = Vec::with_capacity(self.nodes);
        let mut sd = Vec::with_capacity(self.nodes);
        for p in 0..self.nodes {
            for (c, s) in col.iter_mut().zip(&self.columns) {
                *c = s[p];
            }
            let m = pairwise_sum(&col) / k;
            for c in col.iter_mut() {
                *c = (*c - m) * (*c - m);
            }
            mean.push(m);
            sd.push((pairwise_sum(&col) / k).sqrt());
        }
        (mean, sd)
    }
}

/// A statistic `l(x)` whose posterior expectation is estimated by averaging.
#[derive(Clone, Copy, Debug)]
pub enum StatisticFunctional {
    PixelMean,
    PixelSecondMoment,
    /// A bounded scalar map of the whole field.
    Map(fn(&[f64]) -> f64),
}

impl StatisticFunctional {
    /// Monte-Carlo estimate: one value per pixel, or one value for `Map`.
    pub fn estimate(&self, s: &Snapshots) -> Vec<f64> {
        let k = s.len() as f64;
        let per_pixel = |f: &dyn Fn(f64) -> f64| {
            (0..s.nodes)
                .map(|p| pairwise_sum(&s.columns.iter().map(|c| f(c[p])).collect::<Vec<_>>()) / k)
                .collect()
        };
        match self {
            StatisticFunctional::PixelMean => per_pixel(&|v| v),
            StatisticFunctional::PixelSecondMoment => per_pixel(&|v| v * v),
            StatisticFunctional::Map(f) => {
                vec![pairwise_sum(&s.columns.iter().map(|c| f(c)).collect::<Vec<_>>()) / k]
            }
        }
    }
}

/// Pixel-wise posterior statistics for one measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    #[serde(skip)]
    pub mean: Vec<f64>,
    #[serde(skip)]
    pub sd: Vec<f64>,
    pub draws: usize,
    /// Snapshot indices of the important samples, most important first.
    pub pivots: Vec<usize>,
}

/// Draws `k` latent vectors and evaluates `g(z, y)` in batches of `batch`.
///
/// All latents come from `rng` up front; batches then run in parallel, so the
/// result does not depend on the thread count.
pub fn generate_snapshots<G: GeneratorNet + Sync>(
    gen: &G,
    params: &ParamStore<f32>,
    y: &Field,
    k: usize,
    batch: usize,
    rng: &mut Rng,
) -> Result<Snapshots> {
    if k < 1 {
        return Err(Error::invalid("posterior statistics need at least one draw"));
    }
    let nz = gen.latent_dim();
    let z: Vec<f32> = (0..k * nz)
        .map(|_| Distribution::<f64>::sample(&StandardNormal, rng) as f32)
        .collect();
    let g = y.grid;
    let ys: Vec<f32> = y.values.iter().map(|&v| v as f32).collect();
    let batch = batch.max(1);
    let chunks: Vec<(usize, usize)> = (0..k).step_by(batch).map(|s| (s, batch.min(k - s))).collect();
    let out: Vec<Vec<Vec<f64>>> = chunks
        .par_iter()
        .map(|&(start, n)| {
            let graph = Graph::new(Mode::NoGrad);
            let p = params.bind(&graph, false);
            let zt = Tensor::new(vec![n, nz], z[start * nz..(start + n) * nz].to_vec())?;
            let mut yb = Vec::with_capacity(n * ys.len());
            for _ in 0..n {
                yb.extend_from_slice(&ys);
            }
            let yt = Tensor::new(vec![n, g.n2, g.n1, 1], yb)?;
            let x = gen.generate(&p, graph.constant(zt), graph.constant(yt))?;
            let x = x.value();
            let per = x.len() / n;
            (0..n)
                .map(|i| {
                    let col: Vec<f64> = x.data()[i * per..(i + 1) * per].iter().map(|&v| v as f64).collect();
                    if col.iter().any(|v| !v.is_finite()) {
                        Err(Error::NonFinite(format!("generator output for draw {}", start + i)))
                    } else {
                        Ok(col)
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(Snapshots {
        nodes: g.len(),
        columns: out.into_iter().flatten().collect(),
    })
}

/// Mean and population SD of `k` generator draws for measurement `y`.
pub fn posterior_stats<G: GeneratorNet + Sync>(
    gen: &G,
    params: &ParamStore<f32>,
    y: &Field,
    k: usize,
    rng: &mut Rng,
) -> Result<PosteriorSummary> {
    let s = generate_snapshots(gen, params, y, k, 100, rng)?;
    let (mean, sd) = s.mean_sd();
    Ok(PosteriorSummary {
        mean,
        sd,
        draws: k,
        pivots: vec![],
    })
}

/// Mean absolute difference of two statistics on a shared grid.
pub fn l1_error(a: &Field, b: &Field) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::shape("l1-error", "statistics live on different grids"));
    }
    let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).collect();
    Ok(pairwise_sum(&d) / d.len() as f64)
}
