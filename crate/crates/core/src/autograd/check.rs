//! Finite-difference gradient verification.

use super::graph::{Graph, Mode, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Stabilizer in the denominator of the relative error.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// Central differences of a scalar function at `point`.
pub fn central_differences(
    f: impl Fn(&Tensor<f64>) -> Result<f64>,
    point: &Tensor<f64>,
    step: f64,
) -> Result<Tensor<f64>> {
    if step <= 0.0 {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {step}")));
    }
    let mut probe = point.clone();
    let mut out = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let x0 = probe.data()[i];
        probe.data_mut()[i] = x0 + step;
        let fp = f(&probe)?;
        probe.data_mut()[i] = x0 - step;
        let fm = f(&probe)?;
        probe.data_mut()[i] = x0;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite(format!(
                "function value at coordinate {i} +/- {step}: {fp}, {fm}"
            )));
        }
        out.push((fp - fm) / (2.0 * step));
    }
    Tensor::new(point.shape().to_vec(), out)
}

/// `max_i |a_i - c_i| / (|a_i| + |c_i| + floor)`.
pub fn max_relative_error(analytic: &Tensor<f64>, numeric: &Tensor<f64>) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &c)| (a - c).abs() / (a.abs() + c.abs() + RELATIVE_ERROR_FLOOR))
        .fold(0.0, f64::max)
}

/// Compares the reverse-mode gradient of `f` at `point` with central
/// differences and returns the maximum relative error.
pub fn finite_difference_check<F>(f: F, point: &Tensor<f64>, step: f64) -> Result<f64>
where
    F: for<'g> Fn(Var<'g, f64>) -> Result<Var<'g, f64>>,
{
    let graph = Graph::new(Mode::FirstOrder);
    let x = graph.leaf(point.clone());
    let y = f(x)?;
    if !y.value().is_finite() {
        return Err(Error::NonFinite("function value at the check point".into()));
    }
    let analytic = graph.backward(y, &[x])?.tensor(x);
    let numeric = central_differences(
        |p| {
            let g = Graph::new(Mode::NoGrad);
            let v = f(g.constant(p.clone()))?;
            Ok(v.item())
        },
        point,
        step,
    )?;
    Ok(max_relative_error(&analytic, &numeric))
}
