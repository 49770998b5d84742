use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::autograd::{central_differences, max_relative_error, Graph, Mode, Scalar, Tensor, Var};
use crate::data::FieldPairs;
use crate::nn::{Bound, Critic, CriticConfig, CriticNet, GeneratorNet, Init, ParamSpec, ParamStore};
use crate::rng::{stream, Rng};
use crate::Result;

fn randn(rng: &mut Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// `g(z, y) = w_z z + w_y y + b` on scalar fields stored as `N x 1 x 1 x 1`.
struct LinearGen;

impl GeneratorNet for LinearGen {
    fn param_specs(&self) -> Vec<ParamSpec> {
        vec![
            ParamSpec::new("w", &[2, 1], Init::Normal(1.0)),
            ParamSpec::new("b", &[1], Init::Zeros),
        ]
    }

    fn latent_dim(&self) -> usize {
        1
    }

    fn generate<'g, T: Scalar>(
        &self,
        p: &Bound<'g, T>,
        z: Var<'g, T>,
        y: Var<'g, T>,
    ) -> Result<Var<'g, T>> {
        let n = z.shape()[0];
        let zy = z.reshape(&[n, 1, 1, 1])?.concat_channels(y)?.reshape(&[n, 2])?;
        zy.dense(p.get("w")?, Some(p.get("b")?))?.reshape(&[n, 1, 1, 1])
    }
}

/// `d(x, y) = a x + b y + c`.
struct LinearCritic;

impl CriticNet for LinearCritic {
    fn param_specs(&self) -> Vec<ParamSpec> {
        vec![
            ParamSpec::new("w", &[2, 1], Init::Normal(0.1)),
            ParamSpec::new("c", &[1], Init::Zeros),
        ]
    }

    fn critique<'g, T: Scalar>(
        &self,
        p: &Bound<'g, T>,
        x: Var<'g, T>,
        y: Var<'g, T>,
    ) -> Result<Var<'g, T>> {
        let n = x.shape()[0];
        let xy = x.concat_channels(y)?.reshape(&[n, 2])?;
        xy.dense(p.get("w")?, Some(p.get("c")?))?.reshape(&[n])
    }
}

/// `d(x, y) = c + 0 * sum(x)`.
struct ConstCritic(f64);

impl CriticNet for ConstCritic {
    fn param_specs(&self) -> Vec<ParamSpec> {
        Vec::new()
    }

    fn critique<'g, T: Scalar>(
        &self,
        _: &Bound<'g, T>,
        x: Var<'g, T>,
        _: Var<'g, T>,
    ) -> Result<Var<'g, T>> {
        Ok(x.scale(0.0).sum_per_sample().add_scalar(self.0))
    }
}

/// `d(x, y) = <a, x>` with a fixed `a`.
struct FixedLinear(Tensor<f64>);

impl CriticNet for FixedLinear {
    fn param_specs(&self) -> Vec<ParamSpec> {
        Vec::new()
    }

    fn critique<'g, T: Scalar>(
        &self,
        _: &Bound<'g, T>,
        x: Var<'g, T>,
        _: Var<'g, T>,
    ) -> Result<Var<'g, T>> {
        let n = x.shape()[0];
        let f = self.0.len();
        let a = x.graph().constant(self.0.cast::<T>().reshape(&[f, 1])?);
        x.reshape(&[n, f])?.matmul(a, false, false)?.reshape(&[n])
    }
}

/// `d(x, y) = sum(x)`.
struct SumCritic;

impl CriticNet for SumCritic {
    fn param_specs(&self) -> Vec<ParamSpec> {
        Vec::new()
    }

    fn critique<'g, T: Scalar>(
        &self,
        _: &Bound<'g, T>,
        x: Var<'g, T>,
        _: Var<'g, T>,
    ) -> Result<Var<'g, T>> {
        Ok(x.sum_per_sample())
    }
}

/// `g(z, y) = 1` everywhere.
struct OnesGen;

impl GeneratorNet for OnesGen {
    fn param_specs(&self) -> Vec<ParamSpec> {
        Vec::new()
    }

    fn latent_dim(&self) -> usize {
        2
    }

    fn generate<'g, T: Scalar>(
        &self,
        _: &Bound<'g, T>,
        _: Var<'g, T>,
        y: Var<'g, T>,
    ) -> Result<Var<'g, T>> {
        Ok(y.scale(0.0).add_scalar(1.0))
    }
}

fn critic_loss_value<C: CriticNet>(
    critic: &C,
    params: &ParamStore<f64>,
    x: &Tensor<f64>,
    gx: &Tensor<f64>,
    y: &Tensor<f64>,
    eps: &[f64],
    lambda: f64,
) -> (f64, f64, f64) {
    let g = Graph::new(Mode::HigherOrder);
    let p = params.bind(&g, true);
    let t = critic_terms(&g, critic, &p, x, gx, y, eps, lambda).unwrap();
    (t.loss.item(), t.payoff.item(), t.penalty.item())
}

#[test]
fn interpolate_endpoints_and_midpoint() {
    let gen = LinearGen;
    let params = ParamStore::<f64>::init(&gen.param_specs(), &mut stream(0, "init", 0));
    let mut rng = stream(1, "test", 0);
    let y = randn(&mut rng, &[3, 1, 1, 1]);
    let z = randn(&mut rng, &[3, 1]);
    let x = randn(&mut rng, &[3, 1, 1, 1]);
    let gx = interpolate(&gen, &params, &x, &y, &z, &[0.0; 3]).unwrap();
    assert_eq!(interpolate(&gen, &params, &x, &y, &z, &[1.0; 3]).unwrap(), x);
    let x2 = gx.map(|v| 2.0 * v);
    let mid = interpolate(&gen, &params, &x2, &y, &z, &[0.5; 3]).unwrap();
    for (m, g) in mid.data().iter().zip(gx.data()) {
        assert!((m - 1.5 * g).abs() <= 1e-15 * g.abs().max(1.0));
    }
    assert!(interpolate(&gen, &params, &x, &y, &z, &[0.5, 1.5, 0.0]).is_err());
    assert!(interpolate(&gen, &params, &x, &y, &z, &[-0.1, 0.5, 0.0]).is_err());
}

#[test]
fn constant_critic_loss_equals_lambda() {
    let mut rng = stream(2, "test", 0);
    let x = randn(&mut rng, &[4, 3, 3, 1]);
    let gx = randn(&mut rng, &[4, 3, 3, 1]);
    let y = randn(&mut rng, &[4, 3, 3, 1]);
    let eps = [0.1, 0.4, 0.7, 0.9];
    let (loss, payoff, gp) = critic_loss_value(&ConstCritic(3.5), &ParamStore::new(), &x, &gx, &y, &eps, 10.0);
    assert_eq!(payoff, 0.0);
    assert_eq!(gp, 10.0);
    assert_eq!(loss, 10.0);
    let (loss, ..) = critic_loss_value(&ConstCritic(0.0), &ParamStore::new(), &x, &gx, &y, &eps, 0.0);
    assert_eq!(loss, 0.0);
}

#[test]
fn unit_linear_critic_has_no_penalty() {
    let mut rng = stream(3, "test", 0);
    let a = randn(&mut rng, &[3, 3, 1]);
    let norm = a.dot(&a).sqrt();
    let a = a.map(|v| v / norm);
    let x = randn(&mut rng, &[5, 3, 3, 1]);
    let gx = randn(&mut rng, &[5, 3, 3, 1]);
    let y = randn(&mut rng, &[5, 3, 3, 1]);
    let eps: Vec<f64> = (0..5).map(|i| i as f64 / 4.0).collect();
    let (loss, _, gp) = critic_loss_value(&FixedLinear(a.clone()), &ParamStore::new(), &x, &gx, &y, &eps, 10.0);
    assert!(gp.abs() < 1e-20, "{gp}");
    let expect: f64 = (0..5)
        .map(|i| (0..9).map(|k| a.data()[k] * (gx.data()[i * 9 + k] - x.data()[i * 9 + k])).sum::<f64>())
        .sum::<f64>()
        / 5.0;
    assert!((loss - expect).abs() < 1e-12, "{loss} vs {expect}");
}

#[test]
fn critic_loss_rejects_bad_mixing_weights_and_mode() {
    let t = Tensor::<f64>::zeros(&[2, 2, 2, 1]);
    let g = Graph::new(Mode::HigherOrder);
    let p = ParamStore::new().bind(&g, true);
    assert!(critic_terms(&g, &ConstCritic(0.0), &p, &t, &t, &t, &[0.5], 10.0).is_err());
    let g = Graph::new(Mode::NoGrad);
    let p = ParamStore::new().bind(&g, true);
    assert!(critic_terms(&g, &ConstCritic(0.0), &p, &t, &t, &t, &[0.5, 0.5], 10.0).is_err());
}

#[test]
fn generator_loss_cases() {
    let g = Graph::<f64>::new(Mode::FirstOrder);
    let none = ParamStore::new().bind(&g, true);
    let y = g.constant(Tensor::zeros(&[2, 4, 5, 1]));
    let z = g.constant(Tensor::zeros(&[2, 2]));
    let loss = generator_loss(&OnesGen, &none, &SumCritic, &none, z, y).unwrap();
    assert_eq!(loss.item(), -20.0);
    let loss = generator_loss(&OnesGen, &none, &ConstCritic(0.0), &none, z, y).unwrap();
    assert_eq!(loss.item(), 0.0);
}

#[test]
fn generator_loss_matches_composed_forward() {
    let critic = Critic::new(CriticConfig {
        height: 4,
        width: 4,
        x_channels: 1,
        y_channels: 1,
        channels: 2,
        depth: 1,
        leaky_slope: 0.2,
        dense_widths: vec![3],
    })
    .unwrap();
    let gen = crate::nn::Generator::new(crate::nn::GeneratorConfig {
        height: 4,
        width: 4,
        in_channels: 1,
        out_channels: 1,
        channels: 2,
        latent_dim: 2,
        depth: 1,
        cin_skip_first_up: false,
        leaky_slope: 0.2,
    })
    .unwrap();
    let gp_store = gen.init_params::<f64>(&mut stream(4, "init", 0));
    let cp_store = critic.init_params::<f64>(&mut stream(4, "init", 1));
    let mut rng = stream(4, "test", 0);
    let y = randn(&mut rng, &[3, 4, 4, 1]);
    let z = randn(&mut rng, &[3, 2]);

    let g = Graph::new(Mode::FirstOrder);
    let (gp, cp) = (gp_store.bind(&g, true), cp_store.bind(&g, false));
    let loss = generator_loss(&gen, &gp, &critic, &cp, g.constant(z.clone()), g.constant(y.clone()))
        .unwrap()
        .item();

    let gx = gen.sample(&gp_store, &z, &y).unwrap();
    let scores = critic.score(&cp_store, &gx, &y).unwrap();
    let expect = -(scores.data().iter().fold(0.0, |a, &v| a + v) * (1.0 / 3.0));
    assert_eq!(loss, expect);
}

fn scalar_store(v: f64) -> ParamStore<f64> {
    let mut s = ParamStore::new();
    s.insert("p", Tensor::from_f64(&[1], &[v]).unwrap());
    s
}

const GAN_ADAM: AdamParams = AdamParams {
    lr: 1e-3,
    beta1: 0.5,
    beta2: 0.9,
    eps: ADAM_EPS,
};

#[test]
fn adam_zero_gradient_keeps_parameters() {
    let mut p = scalar_store(0.25);
    let mut st = AdamState::new(&p);
    adam_update(&mut p, &mut st, &scalar_store(0.0), GAN_ADAM).unwrap();
    assert_eq!(p.get("p").unwrap().data(), &[0.25]);
    assert_eq!(st.t, 1);
}

#[test]
fn adam_first_and_second_step_sizes() {
    let mut p = scalar_store(0.0);
    let mut st = AdamState::new(&p);
    let g = scalar_store(1.0);
    adam_update(&mut p, &mut st, &g, GAN_ADAM).unwrap();
    let first = p.get("p").unwrap().data()[0];
    // m_hat = 1 and v_hat = 1 after bias correction
    assert!((first + 1e-3 / (1.0 + 1e-8)).abs() < 1e-15, "{first}");
    adam_update(&mut p, &mut st, &g, GAN_ADAM).unwrap();
    let second = p.get("p").unwrap().data()[0] - first;
    assert!((second + 1e-3).abs() < 1e-10, "{second}");
    let v = st.v.get("p").unwrap().data()[0];
    assert!((v / (1.0 - 0.9f64.powi(2)) - 1.0).abs() < 1e-12);
    assert_eq!(st.t, 2);
}

#[test]
fn adam_rejects_shape_mismatch() {
    let mut p = scalar_store(0.0);
    let mut st = AdamState::new(&p);
    let mut g = ParamStore::new();
    g.insert("p", Tensor::<f64>::zeros(&[2]));
    assert!(adam_update(&mut p, &mut st, &g, GAN_ADAM).is_err());
}

fn tiny_critic() -> Critic {
    Critic::new(CriticConfig {
        height: 4,
        width: 4,
        x_channels: 1,
        y_channels: 1,
        channels: 2,
        depth: 1,
        leaky_slope: 0.2,
        dense_widths: vec![],
    })
    .unwrap()
}

#[test]
fn penalty_parameter_gradient_matches_finite_differences() {
    let critic = tiny_critic();
    let params = critic.init_params::<f64>(&mut stream(5, "init", 0));
    let mut rng = stream(5, "test", 0);
    let x = randn(&mut rng, &[2, 4, 4, 1]);
    let gx = randn(&mut rng, &[2, 4, 4, 1]);
    let y = randn(&mut rng, &[2, 4, 4, 1]);
    let eps = [0.3, 0.8];

    let g = Graph::new(Mode::HigherOrder);
    let p = params.bind(&g, true);
    let t = critic_terms(&g, &critic, &p, &x, &gx, &y, &eps, 10.0).unwrap();
    let grads = g.grad_of_grad(t.loss, &p.vars()).unwrap();
    assert!(g.nearest_kink().unwrap() > 1e-4);

    for (path, var) in p.paths().zip(p.vars()) {
        let analytic = grads.tensor(var);
        let point = params.get(path).unwrap().clone();
        let numeric = central_differences(
            |v| {
                let mut q = params.clone();
                *q.get_mut(path).unwrap() = v.clone();
                Ok(critic_loss_value(&critic, &q, &x, &gx, &y, &eps, 10.0).0)
            },
            &point,
            1e-5,
        )
        .unwrap();
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < 1e-5, "{path}: relative error {err}");
    }
}

#[test]
fn first_order_recording_misses_penalty_curvature() {
    let critic = tiny_critic();
    let params = critic.init_params::<f64>(&mut stream(5, "init", 0));
    let mut rng = stream(6, "test", 0);
    let x = randn(&mut rng, &[2, 4, 4, 1]);
    let y = randn(&mut rng, &[2, 4, 4, 1]);
    let grad_of = |mode| {
        let g = Graph::new(mode);
        let p = params.bind(&g, true);
        let t = critic_terms(&g, &critic, &p, &x, &x, &y, &[0.5, 0.5], 10.0).unwrap();
        let r = g.backward(t.penalty, &p.vars()).unwrap();
        p.vars().iter().map(|v| r.tensor(*v).dot(&r.tensor(*v))).sum::<f64>()
    };
    assert_eq!(grad_of(Mode::FirstOrder), 0.0);
    assert!(grad_of(Mode::HigherOrder) > 0.0);
}

fn toy_pairs(n: usize, seed: u64) -> FieldPairs<f64> {
    // xi ~ N(2, 1), y = xi + N(0, 0.25)
    let mut rng = stream(seed, "dataset", 0);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: f64 = 2.0 + Distribution::<f64>::sample(&StandardNormal, &mut rng);
        let e: f64 = StandardNormal.sample(&mut rng);
        xs.push(xi);
        ys.push(xi + 0.5 * e);
    }
    FieldPairs::new(
        Tensor::new(vec![n, 1, 1, 1], xs).unwrap(),
        Tensor::new(vec![n, 1, 1, 1], ys).unwrap(),
    )
    .unwrap()
}

fn toy_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-2,
        batch_size: 32,
        n_critic: 4,
        epochs: 1000,
        latent_dim: 1,
        rng_seed: 11,
        ..Default::default()
    }
}

/// One-hidden-layer leaky critic on `(x, y)`.
struct MlpCritic(usize);

impl CriticNet for MlpCritic {
    fn param_specs(&self) -> Vec<ParamSpec> {
        let h = self.0;
        vec![
            ParamSpec::new("w1", &[2, h], Init::Normal(1.0)),
            ParamSpec::new("b1", &[h], Init::Normal(1.0)),
            ParamSpec::new("w2", &[h, 1], Init::Normal(1.0 / (h as f64).sqrt())),
            ParamSpec::new("c", &[1], Init::Zeros),
        ]
    }

    fn critique<'g, T: Scalar>(
        &self,
        p: &Bound<'g, T>,
        x: Var<'g, T>,
        y: Var<'g, T>,
    ) -> Result<Var<'g, T>> {
        let n = x.shape()[0];
        let xy = x.concat_channels(y)?.reshape(&[n, 2])?;
        let h = xy.dense(p.get("w1")?, Some(p.get("b1")?))?.leaky_relu(0.2);
        h.dense(p.get("w2")?, Some(p.get("c")?))?.reshape(&[n])
    }
}

/// Mean over held-out `y` of the exact W1 distance between the generator's
/// conditional `N(w_y y + b, w_z^2)` and the conjugate posterior
/// `N(0.8 y + 0.4, 0.2)`, using sorted normal draws as quantiles.
fn conditional_w1(params: &ParamStore<f64>, ys: &[f64]) -> f64 {
    let w = params.get("w").unwrap().data();
    let b = params.get("b").unwrap().data()[0];
    let (wz, wy) = (w[0], w[1]);
    let mut q = randn(&mut stream(7, "quantiles", 0), &[20000]).into_data();
    q.sort_by(f64::total_cmp);
    let sd_post = 0.2f64.sqrt();
    ys.iter()
        .map(|&y| {
            let dm = wy * y + b - (0.8 * y + 0.4);
            let ds = wz.abs() - sd_post;
            q.iter().map(|t| (dm + ds * t).abs()).sum::<f64>() / q.len() as f64
        })
        .sum::<f64>()
        / ys.len() as f64
}

// In one dimension the critic slope on the interpolation segment can only
// change sign by passing through zero, which the two-sided penalty charges
// `lambda` for. With `lambda = 10` a critic initialised with the wrong sign
// stays there and the generator walks away, so the toy uses a light penalty.
#[test]
fn toy_problem_w1_halves_in_200_generator_steps() {
    let data = toy_pairs(2048, 1);
    let held_out: Vec<f64> = toy_pairs(256, 2).y().data().to_vec();
    for seed in 11..21 {
        let cfg = TrainConfig {
            gp_lambda: 0.1,
            rng_seed: seed,
            ..toy_config()
        };
        let mut tr = Trainer::new(&LinearGen, &MlpCritic(32), cfg).unwrap();
        let before = conditional_w1(&tr.gen_params, &held_out);
        tr.run(
            &data,
            &TrainOptions {
                max_generator_steps: Some(200),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(tr.generator_steps(), 200);
        let after = conditional_w1(&tr.gen_params, &held_out);
        assert!(after <= 0.5 * before, "seed {seed}: conditional W1 {before} -> {after}");
    }
}

#[test]
fn update_ratio_and_reproducibility() {
    let data = toy_pairs(256, 3);
    let cfg = TrainConfig {
        batch_size: 8,
        n_critic: 3,
        epochs: 10,
        ..toy_config()
    };
    let run = || {
        let mut tr = Trainer::new(&LinearGen, &LinearCritic, cfg.clone()).unwrap();
        tr.run(
            &data,
            &TrainOptions {
                max_generator_steps: Some(60),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(tr.critic_steps(), 3 * tr.generator_steps());
        tr.log
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), 60);
    let bits = |l: &TrainLog| l.records.iter().map(|r| r.deterministic_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert!(a.records.windows(2).all(|w| w[1].step == w[0].step + 1));
}

#[test]
fn log_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut log = TrainLog::default();
    for s in 1..4 {
        log.push(LogRecord {
            step: s,
            loss_d: -0.5 * s as f64,
            loss_g: 1.25,
            gp: 0.125,
            seconds: 0.5,
        })
        .unwrap();
    }
    let path = dir.path().join("log.csv");
    log.write_csv(&path).unwrap();
    assert_eq!(TrainLog::read_csv(&path).unwrap(), log);
    assert!(log
        .push(LogRecord {
            step: 3,
            loss_d: 0.0,
            loss_g: 0.0,
            gp: 0.0,
            seconds: 0.0
        })
        .is_err());
}

#[test]
fn checkpoints_round_trip_and_survive_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let mut data = toy_pairs(64, 4);
    let cfg = TrainConfig {
        batch_size: 1,
        n_critic: 1,
        epochs: 1,
        ..toy_config()
    };
    // first a clean run
    let mut tr = Trainer::new(&LinearGen, &LinearCritic, cfg.clone()).unwrap();
    let opts = TrainOptions {
        out_dir: Some(dir.path().join("ok")),
        checkpoint_every: 16,
        meta: serde_json::json!({"tag": "toy"}),
        ..Default::default()
    };
    tr.run(&data, &opts).unwrap();
    let ck = Checkpoint::load(dir.path().join("ok").join(FINAL_CHECKPOINT)).unwrap();
    assert_eq!(ck.generator(), tr.gen_params.cast::<f32>());
    assert_eq!(ck.meta.generator_steps, 64);
    assert_eq!(ck.meta.critic_steps, 64);
    assert_eq!(ck.meta.meta["tag"], "toy");
    assert_eq!(TrainLog::read_csv(dir.path().join("ok").join(LOG_FILE)).unwrap().len(), 64);
    let steps = std::fs::read_dir(dir.path().join("ok/checkpoints")).unwrap().count();
    assert_eq!(steps, 2 * 4);

    // a poisoned record stops training with an error and keeps earlier checkpoints
    let mut x = data.x().clone();
    x.data_mut()[63] = f64::NAN;
    data = FieldPairs::new(x, data.y().clone()).unwrap();
    let mut tr = Trainer::new(&LinearGen, &LinearCritic, cfg).unwrap();
    let opts = TrainOptions {
        out_dir: Some(dir.path().join("bad")),
        checkpoint_every: 1,
        ..Default::default()
    };
    let err = tr.run(&data, &opts).unwrap_err();
    assert!(matches!(err, crate::Error::NonFinite(_)), "{err}");
    assert!(!dir.path().join("bad").join(FINAL_CHECKPOINT).exists());
    let kept: Vec<_> = std::fs::read_dir(dir.path().join("bad/checkpoints"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "cwpm"))
        .collect();
    assert_eq!(kept.len(), tr.generator_steps());
    for p in kept {
        let ck = Checkpoint::load(&p).unwrap();
        assert!(ck.store.iter().all(|(_, t)| t.is_finite()));
    }
}

#[test]
fn resume_mid_epoch_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let toy = toy_pairs(64, 5);
    let data = FieldPairs::new(toy.x().cast::<f32>(), toy.y().cast::<f32>()).unwrap();
    let cfg = TrainConfig {
        batch_size: 8,
        n_critic: 3,
        epochs: 3,
        ..toy_config()
    };
    let full_dir = dir.path().join("full");
    let mut full = Trainer::<f32, _, _>::new(&LinearGen, &LinearCritic, cfg.clone()).unwrap();
    let opts = TrainOptions {
        out_dir: Some(full_dir.clone()),
        checkpoint_every: 3,
        ..Default::default()
    };
    full.run(&data, &opts).unwrap();
    assert_eq!(full.generator_steps(), 8);

    // Step 3 lands one batch into the second epoch.
    let resume_dir = dir.path().join("resumed");
    std::fs::create_dir_all(&resume_dir).unwrap();
    std::fs::copy(full_dir.join(LOG_FILE), resume_dir.join(LOG_FILE)).unwrap();
    let ck = Checkpoint::load(full_dir.join("checkpoints/step-0000003.cwpm")).unwrap();
    assert_eq!((ck.meta.epoch, ck.meta.batch_in_epoch), (1, 1));
    let mut resumed = Trainer::<f32, _, _>::resume(&LinearGen, &LinearCritic, &ck, None).unwrap();
    resumed
        .run(&data, &TrainOptions { out_dir: Some(resume_dir.clone()), ..opts })
        .unwrap();
    assert_eq!(resumed.generator_steps(), 8);
    assert_eq!(resumed.gen_params, full.gen_params);
    assert_eq!(resumed.critic_params, full.critic_params);
    let bits = |p: &std::path::Path| {
        TrainLog::read_csv(p.join(LOG_FILE)).unwrap().records.iter().map(|r| r.deterministic_bits()).collect::<Vec<_>>()
    };
    assert_eq!(bits(&resume_dir), bits(&full_dir));
}

#[test]
fn resume_rejects_a_foreign_network() {
    let dir = tempfile::tempdir().unwrap();
    let tr = Trainer::<f64, _, _>::new(&LinearGen, &LinearCritic, toy_config()).unwrap();
    tr.save_checkpoint(&dir.path().join("c.cwpm"), &serde_json::Value::Null).unwrap();
    let ck = Checkpoint::load(dir.path().join("c.cwpm")).unwrap();
    assert!(Trainer::<f64, _, _>::resume(&LinearGen, &MlpCritic(4), &ck, None).is_err());
}
