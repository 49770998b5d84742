use crate::autograd::Scalar;
use crate::error::{Error, Result};
use crate::nn::ParamStore;

/// First and second moment estimates for one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: ParamStore<T>,
    pub v: ParamStore<T>,
    pub t: u64,
}

/// Adam step sizes and decay rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

pub const ADAM_EPS: f64 = 1e-8;

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamStore<T>) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam step, in place.
pub fn adam_update<T: Scalar>(
    params: &mut ParamStore<T>,
    state: &mut AdamState<T>,
    grads: &ParamStore<T>,
    hp: AdamParams,
) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::shape(
            "adam",
            format!("{} gradients for {} parameters", grads.len(), params.len()),
        ));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - hp.beta1.powi(t);
    let c2 = 1.0 - hp.beta2.powi(t);
    let (b1, b2) = (T::of(hp.beta1), T::of(hp.beta2));
    let (one, eps) = (T::one(), T::of(hp.eps));
    let (lr, c1, c2) = (T::of(hp.lr), T::of(c1), T::of(c2));
    for (path, p) in params.iter_mut() {
        let (g, m, v) = match (grads.get(path), state.m.get_mut(path), state.v.get_mut(path)) {
            (Some(g), Some(m), Some(v)) => (g, m, v),
            _ => return Err(Error::invalid(format!("no gradient or moment for `{path}`"))),
        };
        if g.shape() != p.shape() || m.shape() != p.shape() {
            return Err(Error::shape(
                "adam",
                format!("`{path}`: gradient {:?} vs parameter {:?}", g.shape(), p.shape()),
            ));
        }
        let (pd, gd) = (p.data_mut(), g.data());
        let (md, vd) = (m.data_mut(), v.data_mut());
        for i in 0..pd.len() {
            md[i] = b1 * md[i] + (one - b1) * gd[i];
            vd[i] = b2 * vd[i] + (one - b2) * gd[i] * gd[i];
            let mhat = md[i] / c1;
            let vhat = vd[i] / c2;
            pd[i] = pd[i] - lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}
