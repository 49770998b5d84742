use std::f64::consts::PI;

use super::grid::{Field, Grid2D};
use crate::error::{Error, Result};

/// Width of the locality-study bump.
pub const BUMP_SIGMA: f64 = 0.7;

/// `exp(-|s - s0|^2 / (2 sigma^2)) / (sqrt(2 pi) sigma)` at every node.
pub fn gaussian_bump(center: [f64; 2], sigma: f64, grid: &Grid2D) -> Result<Field> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("bump width must be positive, got {sigma}")));
    }
    let peak = 1.0 / ((2.0 * PI).sqrt() * sigma);
    Ok(grid.sample(|s| {
        let r2 = (s[0] - center[0]).powi(2) + (s[1] - center[1]).powi(2);
        peak * (-r2 / (2.0 * sigma * sigma)).exp()
    }))
}

/// Leading-order conductivity change at `s` caused by a point perturbation
/// `delta_u` of the measurement at `s0`:
/// `-delta_u (grad kappa(s0) . grad g + kappa(s0) g_rr)`, `g = ln|s - s0| / (2 pi)`.
///
/// The free-space Green's function is harmonic away from `s0`, so its
/// Laplacian vanishes there; the curvature term uses the radial second
/// derivative `g_rr = -1 / (2 pi r^2)`, which carries the `r^-2` singularity.
pub fn delta_kappa_kernel(
    s: [f64; 2],
    s0: [f64; 2],
    kappa0: f64,
    grad_kappa0: [f64; 2],
    delta_u: f64,
) -> Result<f64> {
    let d = [s[0] - s0[0], s[1] - s0[1]];
    let r2 = d[0] * d[0] + d[1] * d[1];
    if r2 == 0.0 {
        return Err(Error::invalid("kernel is singular at s = s0"));
    }
    let grad_g = [d[0] / (2.0 * PI * r2), d[1] / (2.0 * PI * r2)];
    let g_rr = -1.0 / (2.0 * PI * r2);
    Ok(-delta_u * (grad_kappa0[0] * grad_g[0] + grad_kappa0[1] * grad_g[1] + kappa0 * g_rr))
}

/// Distance along the unit ray `e` from `s0` beyond which the kernel
/// magnitude decreases monotonically.
///
/// When `grad kappa . e > 0` the two terms have opposite signs and cancel at
/// `r = kappa0 / (grad kappa . e)`; past twice that distance the gradient term
/// dominates. Along every other ray the magnitude decreases from `s0` outward.
pub fn kernel_monotone_radius(kappa0: f64, grad_kappa0: [f64; 2], e: [f64; 2]) -> f64 {
    let c = grad_kappa0[0] * e[0] + grad_kappa0[1] * e[1];
    if c > 0.0 {
        2.0 * kappa0.abs() / c
    } else {
        0.0
    }
}

/// Weighted second moment `sum |s - s0|^2 u / sum u` about `s0`.
pub fn second_moment(u: &Field, s0: [f64; 2]) -> f64 {
    let g = &u.grid;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..g.n2 {
        for j in 0..g.n1 {
            let s = g.point(i, j);
            let w = u.at(i, j);
            num += w * ((s[0] - s0[0]).powi(2) + (s[1] - s0[1]).powi(2));
            den += w;
        }
    }
    num / den
}
