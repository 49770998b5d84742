use crate::autograd::{Graph, Mode, Scalar, Tensor, Var};
use crate::error::{Error, Result};
use crate::nn::{Bound, CriticNet, GeneratorNet, ParamStore};

fn check_eps(eps: &[f64], n: usize) -> Result<()> {
    if eps.len() != n {
        return Err(Error::invalid(format!("{} mixing weights for {n} samples", eps.len())));
    }
    if let Some(e) = eps.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::invalid(format!("mixing weight {e} outside [0, 1]")));
    }
    Ok(())
}

/// `eps_i x_i + (1 - eps_i) gx_i` per sample.
pub fn mix<T: Scalar>(x: &Tensor<T>, gx: &Tensor<T>, eps: &[f64]) -> Result<Tensor<T>> {
    if x.shape() != gx.shape() {
        return Err(Error::shape(
            "interpolate",
            format!("x {:?} vs g(z, y) {:?}", x.shape(), gx.shape()),
        ));
    }
    let n = x.batch();
    check_eps(eps, n)?;
    let per = x.len() / n;
    let data = x
        .data()
        .iter()
        .zip(gx.data())
        .enumerate()
        .map(|(i, (&a, &b))| {
            let e = eps[i / per];
            if e == 1.0 {
                a
            } else if e == 0.0 {
                b
            } else {
                T::of(e) * a + T::of(1.0 - e) * b
            }
        })
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// Interpolate `eps x + (1 - eps) g(z, y)` between real and generated fields.
pub fn interpolate<T: Scalar, G: GeneratorNet>(
    gen: &G,
    params: &ParamStore<T>,
    x: &Tensor<T>,
    y: &Tensor<T>,
    z: &Tensor<T>,
    eps: &[f64],
) -> Result<Tensor<T>> {
    check_eps(eps, x.batch())?;
    let g = Graph::new(Mode::NoGrad);
    let p = params.bind(&g, false);
    let gx = gen.generate(&p, g.constant(z.clone()), g.constant(y.clone()))?;
    mix(x, &gx.value(), eps)
}

/// The pieces of the critic objective recorded on one graph.
pub struct CriticTerms<'g, T> {
    /// `payoff + penalty`, minimized by the critic.
    pub loss: Var<'g, T>,
    /// `mean(-d(x, y) + d(g, y))`.
    pub payoff: Var<'g, T>,
    /// `lambda * mean((|d_1 d(h, y)| - 1)^2)`.
    pub penalty: Var<'g, T>,
    /// Per-sample input-gradient norms at the interpolates.
    pub grad_norms: Var<'g, T>,
}

/// Critic loss with gradient penalty for fixed generated fields `gx`.
///
/// For the parameter gradient to include the penalty's second-order path the
/// graph must be in [`Mode::HigherOrder`]; [`Mode::FirstOrder`] still gives
/// the correct value.
#[allow(clippy::too_many_arguments)]
pub fn critic_terms<'g, T: Scalar, C: CriticNet>(
    graph: &'g Graph<T>,
    critic: &C,
    p: &Bound<'g, T>,
    x: &Tensor<T>,
    gx: &Tensor<T>,
    y: &Tensor<T>,
    eps: &[f64],
    lambda: f64,
) -> Result<CriticTerms<'g, T>> {
    if graph.mode() == Mode::NoGrad {
        return Err(Error::invalid(
            "the gradient penalty needs a recording graph (FirstOrder or HigherOrder)",
        ));
    }
    if lambda < 0.0 {
        return Err(Error::invalid(format!("gradient-penalty weight {lambda} is negative")));
    }
    let h = mix(x, gx, eps)?;
    let yv = graph.constant(y.clone());
    let real = critic.critique(p, graph.constant(x.clone()), yv)?;
    let fake = critic.critique(p, graph.constant(gx.clone()), yv)?;
    let payoff = fake.sub(real)?.reduce_mean();
    let hv = graph.leaf(h);
    let dh = critic.critique(p, hv, yv)?.reduce_sum();
    let grad = graph
        .backward(dh, &[hv])?
        .get(hv)
        .expect("gradient requested for the interpolate");
    let grad_norms = grad.square().sum_per_sample().sqrt();
    let penalty = grad_norms.add_scalar(-1.0).square().reduce_mean().scale(lambda);
    let loss = payoff.add(penalty)?;
    Ok(CriticTerms {
        loss,
        payoff,
        penalty,
        grad_norms,
    })
}

/// `mean(-d(g(z, y), y))`.
pub fn generator_loss<'g, T: Scalar, G: GeneratorNet, C: CriticNet>(
    gen: &G,
    gp: &Bound<'g, T>,
    critic: &C,
    cp: &Bound<'g, T>,
    z: Var<'g, T>,
    y: Var<'g, T>,
) -> Result<Var<'g, T>> {
    let gx = gen.generate(gp, z, y)?;
    Ok(critic.critique(cp, gx, y)?.reduce_mean().neg())
}
