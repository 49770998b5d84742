//! Forward solvers that turn inferred fields into measurements.
//!
//! Two problems are covered. Time-dependent heat conduction on `[0, 2 pi]^2`
//! maps an initial temperature to the temperature at `T`; steady conduction on
//! the unit square maps a conductivity field to the temperature it supports
//! under a uniform source. Both impose zero Dirichlet data. The module also
//! carries the regularized backward heat solve and the closed-form
//! perturbation kernel used by the locality probes.

mod fem;
mod grid;
mod heat;
mod kernels;
mod linalg;
mod spectral;

pub use fem::{assemble_stiffness, steady_conduction_fem, steady_conduction_fem_source, triangulate};
pub use grid::{Field, Grid2D};
pub use heat::{heat_forward_fd, heat_forward_fd_modal, heat_forward_fd_observe, HeatConfig};
pub use kernels::{delta_kappa_kernel, gaussian_bump, kernel_monotone_radius, second_moment, BUMP_SIGMA};
pub use linalg::{conjugate_gradient, Csr, CG_TOLERANCE};
pub use spectral::{analyze, eigenvalue, fft_regularized_inverse, sine_propagate, synthesize, ExtendedGrid};

#[cfg(test)]
mod tests;
