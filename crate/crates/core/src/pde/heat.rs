use serde::{Deserialize, Serialize};

use super::grid::Field;
use super::linalg::{conjugate_gradient, CG_TOLERANCE};
use super::spectral::{analyze, synthesize};
use crate::error::{Error, Result};

/// Time-dependent heat conduction with constant coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatConfig {
    pub kappa: f64,
    #[serde(default = "one")]
    pub t_final: f64,
    #[serde(default = "hundred")]
    pub steps: usize,
    #[serde(default)]
    pub source: f64,
}

fn one() -> f64 {
    1.0
}

fn hundred() -> usize {
    100
}

impl HeatConfig {
    pub fn new(kappa: f64) -> Self {
        HeatConfig {
            kappa,
            t_final: 1.0,
            steps: 100,
            source: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !(self.t_final > 0.0) || self.steps < 1 {
            return Err(Error::invalid(format!(
                "heat config needs kappa > 0, T > 0 and at least one step, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Integrates `u_t = kappa Lap u + b` to `t_final` with implicit Euler and the
/// 5-point Laplacian, zero Dirichlet data on the box boundary.
///
/// Each step solves `(I - dt kappa L) u^{n+1} = u^n + dt b` on interior nodes by
/// conjugate gradients, warm-started from `u^n`.
pub fn heat_forward_fd(u0: &Field, cfg: &HeatConfig) -> Result<Field> {
    heat_forward_fd_observe(u0, cfg, |_, _| {})
}

/// As [`heat_forward_fd`], calling `observe(step, values)` after every step.
pub fn heat_forward_fd_observe(
    u0: &Field,
    cfg: &HeatConfig,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<Field> {
    cfg.validate()?;
    let g = u0.grid;
    let (m1, m2) = (g.n1 - 2, g.n2 - 2);
    let dt = cfg.t_final / cfg.steps as f64;
    let c1 = dt * cfg.kappa / (g.h1() * g.h1());
    let c2 = dt * cfg.kappa / (g.h2() * g.h2());
    let diag = 1.0 + 2.0 * c1 + 2.0 * c2;
    let apply = |u: &[f64], out: &mut [f64]| {
        for i in 0..m2 {
            for j in 0..m1 {
                let k = i * m1 + j;
                let mut v = diag * u[k];
                if j > 0 {
                    v -= c1 * u[k - 1];
                }
                if j + 1 < m1 {
                    v -= c1 * u[k + 1];
                }
                if i > 0 {
                    v -= c2 * u[k - m1];
                }
                if i + 1 < m2 {
                    v -= c2 * u[k + m1];
                }
                out[k] = v;
            }
        }
    };
    let mut u: Vec<f64> = (0..m2)
        .flat_map(|i| (0..m1).map(move |j| (i + 1, j + 1)))
        .map(|(i, j)| u0.at(i, j))
        .collect();
    let mut rhs = vec![0.0; u.len()];
    let max_iter = 10 * u.len() + 100;
    let mut full = vec![0.0; g.len()];
    for step in 1..=cfg.steps {
        for (r, v) in rhs.iter_mut().zip(&u) {
            *r = v + dt * cfg.source;
        }
        conjugate_gradient(apply, &rhs, &mut u, CG_TOLERANCE, max_iter)?;
        scatter_interior(&u, m1, m2, &mut full);
        observe(step, &full);
    }
    Field::new(g, full)
}

fn scatter_interior(u: &[f64], m1: usize, m2: usize, full: &mut [f64]) {
    let n1 = m1 + 2;
    for i in 0..m2 {
        full[(i + 1) * n1 + 1..(i + 1) * n1 + 1 + m1].copy_from_slice(&u[i * m1..(i + 1) * m1]);
    }
}

/// The same implicit-Euler scheme as [`heat_forward_fd`], advanced exactly in
/// the discrete sine eigenbasis of the 5-point Laplacian instead of by
/// iterative solves. Agrees with it to the solver tolerance and is much
/// cheaper when many forward solves are needed.
pub fn heat_forward_fd_modal(u0: &Field, cfg: &HeatConfig) -> Result<Field> {
    cfg.validate()?;
    let g = u0.grid;
    let dt = cfg.t_final / cfg.steps as f64;
    let lam = |n: usize, h: f64, k: usize| {
        let s = (std::f64::consts::PI * k as f64 / (2.0 * (n - 1) as f64)).sin();
        4.0 / (h * h) * s * s
    };
    let mut c = analyze(u0);
    let unit = analyze(&Field::new(g, vec![1.0; g.len()])?);
    for (l, row) in c.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            let damp = 1.0 / (1.0 + dt * cfg.kappa * (lam(g.n1, g.h1(), k + 1) + lam(g.n2, g.h2(), l + 1)));
            let src = dt * cfg.source * unit[l][k];
            for _ in 0..cfg.steps {
                *v = (*v + src) * damp;
            }
        }
    }
    Ok(synthesize(&g, &c))
}
