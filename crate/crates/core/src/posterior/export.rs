use std::path::Path;

use serde::Serialize;

use crate::autograd::Tensor;
use crate::data::{save_tensor, write_pgm_auto};
use crate::error::{Error, Result};
use crate::pde::{Field, Grid2D};

fn field_tensor(grid: &Grid2D, v: &[f64]) -> Result<Tensor<f32>> {
    Tensor::new(vec![grid.n2, grid.n1], v.iter().map(|&x| x as f32).collect())
}

/// Writes `name.cwt` and `name.pgm` for one nodal statistic.
pub fn export_field(dir: &Path, name: &str, grid: &Grid2D, values: &[f64]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::at_path(dir))?;
    save_tensor(&dir.join(format!("{name}.cwt")), &field_tensor(grid, values)?)?;
    write_pgm_auto(&dir.join(format!("{name}.pgm")), &Field::new(*grid, values.to_vec())?)
}

/// Writes a JSON sidecar.
pub fn export_json<S: Serialize>(dir: &Path, name: &str, value: &S) -> Result<()> {
    let path = dir.join(name);
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(&path, s).map_err(Error::at_path(&path))
}
