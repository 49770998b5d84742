use rand_distr::{Distribution, StandardNormal};

use crate::autograd::{Graph, Mode, Tensor};
use crate::error::{Error, Result};
use crate::nn::{GeneratorNet, ParamStore};
use crate::pde::{Field, Grid2D};
use crate::rng::Rng;

/// Averaged absolute sensitivity of output pixel `pixel` to the measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientMap {
    pub pixel: usize,
    pub map: Field,
    pub n_y: usize,
    pub n_z: usize,
}

/// `(1 / (n_y n_z)) sum_i sum_j |d g_k(z_j, y_i) / d y_i|` by reverse mode.
///
/// Every latent draw is paired with the whole batch of measurements; the
/// generator acts on samples independently, so one sweep per draw suffices.
pub fn gradient_map<G: GeneratorNet>(
    gen: &G,
    params: &ParamStore<f32>,
    pixel: usize,
    ys: &[Field],
    n_z: usize,
    rng: &mut Rng,
) -> Result<GradientMap> {
    let first = ys.first().ok_or_else(|| Error::invalid("gradient map needs at least one measurement"))?;
    let grid = first.grid;
    if pixel >= grid.len() {
        return Err(Error::invalid(format!("pixel {pixel} outside a grid of {} nodes", grid.len())));
    }
    if ys.iter().any(|y| y.grid != grid) {
        return Err(Error::shape("gradient-map", "measurements live on different grids"));
    }
    if n_z < 1 {
        return Err(Error::invalid("gradient map needs at least one latent draw"));
    }
    let (n, nodes, nz) = (ys.len(), grid.len(), gen.latent_dim());
    let yb: Vec<f32> = ys.iter().flat_map(|y| y.values.iter().map(|&v| v as f32)).collect();
    let mut mask = vec![0.0f32; n * nodes];
    for i in 0..n {
        mask[i * nodes + pixel] = 1.0;
    }
    let mut acc = vec![0.0f64; nodes];
    for j in 0..n_z {
        let z: Vec<f32> = (0..nz).map(|_| Distribution::<f64>::sample(&StandardNormal, rng) as f32).collect();
        let zb: Vec<f32> = (0..n).flat_map(|_| z.iter().copied()).collect();
        let graph = Graph::new(Mode::FirstOrder);
        let p = params.bind(&graph, false);
        let y = graph.leaf(Tensor::new(vec![n, grid.n2, grid.n1, 1], yb.clone())?);
        let x = gen.generate(&p, graph.constant(Tensor::new(vec![n, nz], zb)?), y)?;
        let m = graph.constant(Tensor::new(x.shape(), channel_mask(&mask, &x.shape()))?);
        let dy = graph.backward(x.mul(m)?.reduce_sum(), &[y])?.tensor(y);
        for (i, chunk) in dy.data().chunks(nodes).enumerate() {
            if let Some(bad) = chunk.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "sensitivity at node {bad} for measurement {i}, latent draw {j}"
                )));
            }
            for (a, &v) in acc.iter_mut().zip(chunk) {
                *a += (v as f64).abs();
            }
        }
    }
    let scale = 1.0 / (n * n_z) as f64;
    Ok(GradientMap {
        pixel,
        map: Field::new(grid, acc.into_iter().map(|v| v * scale).collect())?,
        n_y: n,
        n_z,
    })
}

// Selects the first output channel at the probe pixel.
fn channel_mask(mask: &[f32], shape: &[usize]) -> Vec<f32> {
    let c = shape[3];
    mask.iter().flat_map(|&m| std::iter::once(m).chain(std::iter::repeat_n(0.0, c - 1))).collect()
}

fn within(grid: &Grid2D, pixel: usize, radius: f64) -> impl Fn(usize) -> bool + '_ {
    let (pi, pj) = ((pixel / grid.n1) as f64, (pixel % grid.n1) as f64);
    move |q| {
        let (i, j) = ((q / grid.n1) as f64, (q % grid.n1) as f64);
        (i - pi).powi(2) + (j - pj).powi(2) <= radius * radius
    }
}

/// Share of the map's mass within grid distance `radius` of its pixel.
pub fn concentration_ratio(map: &GradientMap, radius: f64) -> Result<f64> {
    if !(radius >= 0.0) {
        return Err(Error::invalid(format!("radius must be non-negative, got {radius}")));
    }
    let total: f64 = map.map.values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("concentration of an all-zero map is undefined"));
    }
    let inside = within(&map.map.grid, map.pixel, radius);
    let near: f64 = map.map.values.iter().enumerate().filter(|(q, _)| inside(*q)).map(|(_, v)| v).sum();
    Ok((near / total).min(1.0))
}

/// The ratio a uniform map would reach: the disk's share of the nodes.
pub fn uniform_baseline(grid: &Grid2D, pixel: usize, radius: f64) -> f64 {
    let inside = within(grid, pixel, radius);
    (0..grid.len()).filter(|&q| inside(q)).count() as f64 / grid.len() as f64
}
