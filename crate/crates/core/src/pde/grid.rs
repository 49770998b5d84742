use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform node grid on the box `[a1, b1] x [a2, b2]`, boundary nodes included.
///
/// Values are stored row-major with the `s2` index outermost: node `(i, j)`
/// sits at `s = (a1 + j h1, a2 + i h2)` and lives at offset `i * n1 + j`. This
/// matches the `H x W` layout of image tensors, with `H = n2` and `W = n1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub n1: usize,
    pub n2: usize,
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl Grid2D {
    pub fn new(n1: usize, n2: usize, (a1, b1): (f64, f64), (a2, b2): (f64, f64)) -> Result<Self> {
        if n1 < 2 || n2 < 2 {
            return Err(Error::invalid(format!("grid needs at least 2x2 nodes, got {n1}x{n2}")));
        }
        if !(b1 > a1 && b2 > a2) || ![a1, b1, a2, b2].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!(
                "degenerate box [{a1}, {b1}] x [{a2}, {b2}]"
            )));
        }
        Ok(Grid2D { n1, n2, a1, b1, a2, b2 })
    }

    /// `n x n` nodes on `[0, 2 pi]^2`, the heat-conduction domain.
    pub fn heat(n: usize) -> Result<Self> {
        let l = 2.0 * std::f64::consts::PI;
        Self::new(n, n, (0.0, l), (0.0, l))
    }

    /// `n x n` nodes on the unit square, the steady-conduction domain.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, n, (0.0, 1.0), (0.0, 1.0))
    }

    pub fn h1(&self) -> f64 {
        (self.b1 - self.a1) / (self.n1 - 1) as f64
    }

    pub fn h2(&self) -> f64 {
        (self.b2 - self.a2) / (self.n2 - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n1 + j
    }

    /// Coordinates of node `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.a1 + j as f64 * self.h1(),
            self.a2 + i as f64 * self.h2(),
        ]
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.n2 || j + 1 == self.n1
    }

    /// Evaluates `f` at every node.
    pub fn sample(&self, mut f: impl FnMut([f64; 2]) -> f64) -> Field {
        let mut values = Vec::with_capacity(self.len());
        for i in 0..self.n2 {
            for j in 0..self.n1 {
                values.push(f(self.point(i, j)));
            }
        }
        Field { grid: *self, values }
    }

    /// Evaluates `f(i, j)` at every node index.
    pub fn sample_nodes(&self, f: impl Fn(usize, usize) -> f64) -> Field {
        let mut values = Vec::with_capacity(self.len());
        for i in 0..self.n2 {
            for j in 0..self.n1 {
                values.push(f(i, j));
            }
        }
        Field { grid: *self, values }
    }
}

/// Nodal values on a [`Grid2D`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::shape(
                "field",
                format!("{} values for a {}x{} grid", values.len(), grid.n2, grid.n1),
            ));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at node {k}")));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Field { grid, values: vec![0.0; grid.len()] }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoidal approximation of the integral over the box.
    pub fn integral(&self) -> f64 {
        let g = &self.grid;
        let mut s = 0.0;
        for i in 0..g.n2 {
            let wi = if i == 0 || i + 1 == g.n2 { 0.5 } else { 1.0 };
            for j in 0..g.n1 {
                let wj = if j == 0 || j + 1 == g.n1 { 0.5 } else { 1.0 };
                s += wi * wj * self.at(i, j);
            }
        }
        s * g.h1() * g.h2()
    }

    /// Discrete L2 norm `sqrt(h1 h2 sum v^2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.h1() * self.grid.h2()).sqrt()
    }
}
