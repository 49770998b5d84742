//! Sine-series heat propagation and the regularized backward solve.

use std::f64::consts::PI;

use super::grid::{Field, Grid2D};
use crate::error::{Error, Result};

/// `table[k][j] = sin(pi (k+1) (j+1) / (n+1))` for the `n` interior nodes.
fn sine_table(n: usize) -> Vec<Vec<f64>> {
    (1..=n)
        .map(|k| (1..=n).map(|j| (PI * (k * j) as f64 / (n + 1) as f64).sin()).collect())
        .collect()
}

/// Discrete sine coefficients `c[l][k]` of the interior values, mode `k` along
/// `s1` and `l` along `s2`. Exact inverse of [`synthesize`].
pub fn analyze(u: &Field) -> Vec<Vec<f64>> {
    let g = &u.grid;
    let (m1, m2) = (g.n1 - 2, g.n2 - 2);
    let (t1, t2) = (sine_table(m1), sine_table(m2));
    // Along s1 first: rows[i][k] for interior row i.
    let rows: Vec<Vec<f64>> = (0..m2)
        .map(|i| {
            (0..m1)
                .map(|k| (0..m1).map(|j| t1[k][j] * u.at(i + 1, j + 1)).sum::<f64>())
                .collect()
        })
        .collect();
    let scale = 4.0 / ((m1 + 1) * (m2 + 1)) as f64;
    (0..m2)
        .map(|l| {
            (0..m1)
                .map(|k| scale * (0..m2).map(|i| t2[l][i] * rows[i][k]).sum::<f64>())
                .collect()
        })
        .collect()
}

/// Nodal values of the sine series with coefficients `c[l][k]`; zero on the boundary.
pub fn synthesize(grid: &Grid2D, c: &[Vec<f64>]) -> Field {
    let (m1, m2) = (grid.n1 - 2, grid.n2 - 2);
    let (t1, t2) = (sine_table(m1), sine_table(m2));
    let cols: Vec<Vec<f64>> = (0..m2)
        .map(|i| {
            (0..m1)
                .map(|k| (0..m2).map(|l| t2[l][i] * c[l][k]).sum::<f64>())
                .collect()
        })
        .collect();
    let mut values = vec![0.0; grid.len()];
    for i in 0..m2 {
        for j in 0..m1 {
            values[grid.index(i + 1, j + 1)] = (0..m1).map(|k| t1[k][j] * cols[i][k]).sum();
        }
    }
    Field { grid: *grid, values }
}

/// Continuum Dirichlet eigenvalue of mode `(k, l)` (1-based) on the grid's box.
pub fn eigenvalue(grid: &Grid2D, k: usize, l: usize) -> f64 {
    let w1 = PI * k as f64 / (grid.b1 - grid.a1);
    let w2 = PI * l as f64 / (grid.b2 - grid.a2);
    w1 * w1 + w2 * w2
}

/// Advances the heat equation by `t` (negative for backward) in the sine basis,
/// keeping only modes `k, l <= modes` when a cutoff is given.
pub fn sine_propagate(u: &Field, kappa: f64, t: f64, modes: Option<usize>) -> Field {
    let mut c = analyze(u);
    let keep = modes.unwrap_or(usize::MAX);
    for (l, row) in c.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = if k < keep && l < keep {
                *v * (-kappa * eigenvalue(&u.grid, k + 1, l + 1) * t).exp()
            } else {
                0.0
            };
        }
    }
    synthesize(&u.grid, &c)
}

/// The target box padded by one box width on every side, sharing its spacing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtendedGrid {
    pub target: Grid2D,
    pub grid: Grid2D,
}

impl ExtendedGrid {
    pub fn new(target: Grid2D) -> Result<Self> {
        let (l1, l2) = (target.b1 - target.a1, target.b2 - target.a2);
        let grid = Grid2D::new(
            3 * (target.n1 - 1) + 1,
            3 * (target.n2 - 1) + 1,
            (target.a1 - l1, target.b1 + l1),
            (target.a2 - l2, target.b2 + l2),
        )?;
        Ok(ExtendedGrid { target, grid })
    }

    fn offsets(&self) -> (usize, usize) {
        (self.target.n2 - 1, self.target.n1 - 1)
    }

    /// Zero-extends a target-box field.
    pub fn embed(&self, u: &Field) -> Result<Field> {
        if u.grid != self.target {
            return Err(Error::shape("extended-grid", "field is not on the target grid"));
        }
        let (oi, oj) = self.offsets();
        let mut out = Field::zeros(self.grid);
        for i in 0..self.target.n2 {
            for j in 0..self.target.n1 {
                out.values[self.grid.index(i + oi, j + oj)] = u.at(i, j);
            }
        }
        Ok(out)
    }

    pub fn restrict(&self, u: &Field) -> Result<Field> {
        if u.grid != self.grid {
            return Err(Error::shape("extended-grid", "field is not on the extended grid"));
        }
        let (oi, oj) = self.offsets();
        Ok(self.target.sample_nodes(|i, j| u.at(i + oi, j + oj)))
    }
}

/// Regularized backward heat solve: zero-extend `u_t` to the padded box, keep
/// the first `modes` sine modes per axis, undo `t_final` of diffusion on them
/// and restrict back to the target box.
pub fn fft_regularized_inverse(u_t: &Field, kappa: f64, t_final: f64, modes: usize) -> Result<Field> {
    if modes < 1 {
        return Err(Error::invalid("at least one mode must be kept"));
    }
    if !(kappa > 0.0) || !(t_final >= 0.0) {
        return Err(Error::invalid(format!("need kappa > 0 and t >= 0, got {kappa}, {t_final}")));
    }
    let ext = ExtendedGrid::new(u_t.grid)?;
    let back = sine_propagate(&ext.embed(u_t)?, kappa, -t_final, Some(modes));
    ext.restrict(&back)
}
