//! Locality probes for the trained generator and for the inverse map itself.
//!
//! A [`GradientMap`] averages `|dg_k/dy|` over measurements and latent draws;
//! when the mass sits near pixel `k` the generator behaves like a local
//! operator. [`bump_sweep`] measures the same property for the regularized
//! backward heat solve by moving a Gaussian bump over every node.

mod gradient;
mod sweep;

pub use gradient::{concentration_ratio, gradient_map, uniform_baseline, GradientMap};
pub use sweep::{bump_sweep, ring_averages, rings_non_increasing, SweepConfig};

use serde::{Deserialize, Serialize};

use crate::pde::Grid2D;

/// Concentration radius in pixels on the 28x28 grids.
pub const DEFAULT_RADIUS: f64 = 7.0;

/// Six probe pixels on a 2x3 lattice over the interior, as `(row, col)`.
pub fn probe_lattice(grid: &Grid2D) -> Vec<(usize, usize)> {
    let rows = [grid.n2 / 3, 2 * grid.n2 / 3];
    let cols = [grid.n1 / 4, grid.n1 / 2, 3 * grid.n1 / 4];
    rows.iter().flat_map(|&i| cols.iter().map(move |&j| (i, j))).collect()
}

/// One probe of a [`LocalityReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub row: usize,
    pub col: usize,
    pub pixel: usize,
    pub ratio: f64,
    pub baseline: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalityReport {
    pub probes: Vec<ProbeRecord>,
    /// Per-probe ring averages of the bump sweep, if one was run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rings: Vec<Vec<f64>>,
}

impl LocalityReport {
    /// Smallest `ratio / baseline` over all probes.
    pub fn worst_gain(&self) -> f64 {
        self.probes.iter().map(|p| p.ratio / p.baseline).fold(f64::INFINITY, f64::min)
    }
}
