use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::adam::{adam_update, AdamParams, AdamState, ADAM_EPS};
use super::log::{LogRecord, TrainLog, LOG_HEADER};
use super::loss::{critic_terms, generator_loss};
use super::TrainConfig;
use crate::autograd::{GradResult, Graph, Mode, Scalar, Tensor};
use crate::data::FieldPairs;
use crate::error::{Error, Result};
use crate::nn::{Bound, CriticNet, GeneratorNet, ParamStore};
use crate::rng::{stream, Rng};

/// Where and how often to write checkpoints.
#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Run directory; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    /// Checkpoint every this many generator updates; `0` writes only the final one.
    pub checkpoint_every: usize,
    /// Stop after this many generator updates even if epochs remain.
    pub max_generator_steps: Option<usize>,
    /// Free-form metadata stored in every checkpoint sidecar.
    pub meta: serde_json::Value,
}

/// Counters and configuration stored next to a checkpoint.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckpointMeta {
    pub generator_steps: usize,
    pub critic_steps: usize,
    pub epoch: usize,
    pub adam_t_generator: u64,
    pub adam_t_critic: u64,
    /// Batches of the current epoch already consumed.
    #[serde(default)]
    pub batch_in_epoch: usize,
    /// Position of the training stream, so a resumed run draws what the
    /// uninterrupted one would have.
    #[serde(default)]
    pub rng_word_pos: u128,
    pub train: TrainConfig,
    #[serde(default)]
    pub meta: serde_json::Value,
}

/// A loaded checkpoint: parameters under `generator/`, `critic/` and `adam/...`.
pub struct Checkpoint {
    pub store: ParamStore<f32>,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    /// `path` is the `.cwpm` file; the sidecar is the same path with `.json`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let store = ParamStore::load(path)?;
        let side = path.with_extension("json");
        let text = fs::read_to_string(&side).map_err(Error::at_path(&side))?;
        Ok(Checkpoint {
            store,
            meta: serde_json::from_str(&text)?,
        })
    }

    pub fn generator(&self) -> ParamStore<f32> {
        self.store.subtree("generator")
    }

    pub fn critic(&self) -> ParamStore<f32> {
        self.store.subtree("critic")
    }
}

pub const FINAL_CHECKPOINT: &str = "final.cwpm";
pub const LOG_FILE: &str = "train.csv";

/// Alternating cWGAN-GP optimization of a generator and a critic.
pub struct Trainer<'a, T, G, C> {
    gen: &'a G,
    critic: &'a C,
    cfg: TrainConfig,
    pub gen_params: ParamStore<T>,
    pub critic_params: ParamStore<T>,
    adam_g: AdamState<T>,
    adam_d: AdamState<T>,
    rng: Rng,
    critic_steps: usize,
    gen_steps: usize,
    epoch: usize,
    batch_in_epoch: usize,
    pub log: TrainLog,
    pending: Vec<(f64, f64)>,
    start: Instant,
}

fn collect<'g, T: Scalar>(bound: &Bound<'g, T>, grads: &GradResult<'g, T>) -> ParamStore<T> {
    let mut out = ParamStore::new();
    for (path, var) in bound.paths().zip(bound.vars()) {
        out.insert(path.clone(), grads.tensor(var));
    }
    out
}

fn randn<T: Scalar>(rng: &mut Rng, shape: &[usize]) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.sample::<f64, _>(StandardNormal))).collect();
    Tensor::new(shape.to_vec(), data).expect("positive extents")
}

impl<'a, T: Scalar, G: GeneratorNet, C: CriticNet> Trainer<'a, T, G, C> {
    /// Initializes both networks from the `init` stream of `cfg.rng_seed`.
    pub fn new(gen: &'a G, critic: &'a C, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if gen.latent_dim() != cfg.latent_dim {
            return Err(Error::invalid(format!(
                "generator latent dimension {} differs from train.latent_dim {}",
                gen.latent_dim(),
                cfg.latent_dim
            )));
        }
        let gen_params = ParamStore::init(&gen.param_specs(), &mut stream(cfg.rng_seed, "init", 0));
        let critic_params =
            ParamStore::init(&critic.param_specs(), &mut stream(cfg.rng_seed, "init", 1));
        Ok(Self::with_params(gen, critic, cfg, gen_params, critic_params))
    }

    pub fn with_params(
        gen: &'a G,
        critic: &'a C,
        cfg: TrainConfig,
        gen_params: ParamStore<T>,
        critic_params: ParamStore<T>,
    ) -> Self {
        Trainer {
            gen,
            critic,
            rng: stream(cfg.rng_seed, "train", 0),
            adam_g: AdamState::new(&gen_params),
            adam_d: AdamState::new(&critic_params),
            cfg,
            gen_params,
            critic_params,
            critic_steps: 0,
            gen_steps: 0,
            epoch: 0,
            batch_in_epoch: 0,
            log: TrainLog::default(),
            pending: Vec::new(),
            start: Instant::now(),
        }
    }

    /// Continues from a checkpoint written by [`Trainer::save_checkpoint`].
    /// The configuration is the stored one, except that `epochs` may be
    /// raised to train longer.
    pub fn resume(gen: &'a G, critic: &'a C, ckpt: &Checkpoint, epochs: Option<usize>) -> Result<Self> {
        let mut cfg = ckpt.meta.train.clone();
        if let Some(e) = epochs {
            cfg.epochs = e;
        }
        cfg.validate()?;
        let cast = |prefix: &str| ckpt.store.subtree(prefix).cast::<T>();
        let mut t = Self::with_params(gen, critic, cfg, cast("generator"), cast("critic"));
        let check = |name: &str, got: &ParamStore<T>, want: &ParamStore<T>| {
            let ok = got.len() == want.len()
                && got.iter().all(|(k, v)| want.get(k).is_some_and(|w| w.shape() == v.shape()));
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("checkpoint {name} parameters do not match the network")))
            }
        };
        let fresh_g = ParamStore::<T>::init(&gen.param_specs(), &mut stream(0, "shape", 0));
        let fresh_d = ParamStore::<T>::init(&critic.param_specs(), &mut stream(0, "shape", 0));
        check("generator", &t.gen_params, &fresh_g)?;
        check("critic", &t.critic_params, &fresh_d)?;
        t.adam_g.m = cast("adam/generator/m");
        t.adam_g.v = cast("adam/generator/v");
        t.adam_d.m = cast("adam/critic/m");
        t.adam_d.v = cast("adam/critic/v");
        t.adam_g.t = ckpt.meta.adam_t_generator;
        t.adam_d.t = ckpt.meta.adam_t_critic;
        t.critic_steps = ckpt.meta.critic_steps;
        t.gen_steps = ckpt.meta.generator_steps;
        t.epoch = ckpt.meta.epoch;
        t.batch_in_epoch = ckpt.meta.batch_in_epoch;
        t.rng.set_word_pos(ckpt.meta.rng_word_pos);
        Ok(t)
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn critic_steps(&self) -> usize {
        self.critic_steps
    }

    pub fn generator_steps(&self) -> usize {
        self.gen_steps
    }

    fn adam(&self) -> AdamParams {
        AdamParams {
            lr: self.cfg.learning_rate,
            beta1: self.cfg.adam_beta1,
            beta2: self.cfg.adam_beta2,
            eps: ADAM_EPS,
        }
    }

    fn generate(&self, z: &Tensor<T>, y: &Tensor<T>) -> Result<Tensor<T>> {
        let g = Graph::new(Mode::NoGrad);
        let p = self.gen_params.bind(&g, false);
        let out = self.gen.generate(&p, g.constant(z.clone()), g.constant(y.clone()))?;
        Ok((*out.value()).clone())
    }

    /// One critic update on a batch; returns `(loss, penalty)`.
    pub fn critic_step(&mut self, x: &Tensor<T>, y: &Tensor<T>) -> Result<(f64, f64)> {
        let n = x.batch();
        let z = randn(&mut self.rng, &[n, self.cfg.latent_dim]);
        let eps: Vec<f64> = (0..n).map(|_| self.rng.random::<f64>()).collect();
        let gx = self.generate(&z, y)?;
        let graph = Graph::new(Mode::HigherOrder);
        let cp = self.critic_params.bind(&graph, true);
        let terms = critic_terms(&graph, self.critic, &cp, x, &gx, y, &eps, self.cfg.gp_lambda)?;
        let loss = terms.loss.item().to_f64_lossy();
        let gp = terms.penalty.item().to_f64_lossy();
        if !loss.is_finite() || !gp.is_finite() {
            return Err(Error::NonFinite(format!(
                "critic loss {loss} at critic step {} (epoch {})",
                self.critic_steps + 1,
                self.epoch
            )));
        }
        let grads = collect(&cp, &graph.grad_of_grad(terms.loss, &cp.vars())?);
        let hp = self.adam();
        adam_update(&mut self.critic_params, &mut self.adam_d, &grads, hp)?;
        self.critic_steps += 1;
        Ok((loss, gp))
    }

    /// One generator update conditioned on `y`; returns the loss.
    pub fn generator_step(&mut self, y: &Tensor<T>) -> Result<f64> {
        let n = y.batch();
        let z = randn(&mut self.rng, &[n, self.cfg.latent_dim]);
        let graph = Graph::new(Mode::FirstOrder);
        let gp = self.gen_params.bind(&graph, true);
        let cp = self.critic_params.bind(&graph, false);
        let loss = generator_loss(
            self.gen,
            &gp,
            self.critic,
            &cp,
            graph.constant(z),
            graph.constant(y.clone()),
        )?;
        let value = loss.item().to_f64_lossy();
        if !value.is_finite() {
            return Err(Error::NonFinite(format!(
                "generator loss {value} at generator step {} (epoch {})",
                self.gen_steps + 1,
                self.epoch
            )));
        }
        let grads = collect(&gp, &graph.backward(loss, &gp.vars())?);
        let hp = self.adam();
        adam_update(&mut self.gen_params, &mut self.adam_g, &grads, hp)?;
        self.gen_steps += 1;
        Ok(value)
    }

    /// Critic update, followed by a generator update every `n_critic` calls.
    /// Returns the log row when a generator update happened.
    pub fn step(&mut self, x: &Tensor<T>, y: &Tensor<T>) -> Result<Option<LogRecord>> {
        let (loss, gp) = self.critic_step(x, y)?;
        self.pending.push((loss, gp));
        if self.pending.len() < self.cfg.n_critic {
            return Ok(None);
        }
        let loss_g = self.generator_step(y)?;
        let k = self.pending.len() as f64;
        let record = LogRecord {
            step: self.gen_steps,
            loss_d: self.pending.iter().map(|p| p.0).sum::<f64>() / k,
            loss_g,
            gp: self.pending.iter().map(|p| p.1).sum::<f64>() / k,
            seconds: self.start.elapsed().as_secs_f64(),
        };
        self.pending.clear();
        self.log.push(record)?;
        Ok(Some(record))
    }

    fn meta(&self, extra: &serde_json::Value) -> CheckpointMeta {
        CheckpointMeta {
            generator_steps: self.gen_steps,
            critic_steps: self.critic_steps,
            epoch: self.epoch,
            adam_t_generator: self.adam_g.t,
            adam_t_critic: self.adam_d.t,
            batch_in_epoch: self.batch_in_epoch,
            rng_word_pos: self.rng.get_word_pos(),
            train: self.cfg.clone(),
            meta: extra.clone(),
        }
    }

    /// Writes `path` (parameters and moments) and its `.json` sidecar.
    pub fn save_checkpoint(&self, path: &Path, extra: &serde_json::Value) -> Result<()> {
        let mut all = ParamStore::<T>::new();
        all.graft("generator", &self.gen_params);
        all.graft("critic", &self.critic_params);
        all.graft("adam/generator/m", &self.adam_g.m);
        all.graft("adam/generator/v", &self.adam_g.v);
        all.graft("adam/critic/m", &self.adam_d.m);
        all.graft("adam/critic/v", &self.adam_d.v);
        all.save(path)?;
        let side = path.with_extension("json");
        let text = serde_json::to_string_pretty(&self.meta(extra))?;
        fs::write(&side, text).map_err(Error::at_path(&side))?;
        Ok(())
    }

    /// Runs the remaining of `cfg.epochs` passes over `data`, shuffling each
    /// epoch from its own stream and dropping the incomplete last batch. A
    /// resumed trainer keeps the log rows up to its step and appends.
    pub fn run(&mut self, data: &FieldPairs<T>, opts: &TrainOptions) -> Result<()> {
        let b = self.cfg.batch_size;
        if data.len() < b {
            return Err(Error::invalid(format!(
                "dataset has {} records, fewer than one batch of {b}",
                data.len()
            )));
        }
        let mut log_file = match &opts.out_dir {
            Some(dir) => Some(self.open_log(dir)?),
            None => None,
        };
        let batches = data.len() / b;
        'epochs: while self.epoch < self.cfg.epochs {
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut stream(self.cfg.rng_seed, "shuffle", self.epoch as u64));
            while self.batch_in_epoch < batches {
                let chunk = &order[self.batch_in_epoch * b..(self.batch_in_epoch + 1) * b];
                let (x, y) = data.gather(chunk)?;
                let rec = self.step(&x, &y)?;
                self.batch_in_epoch += 1;
                let Some(rec) = rec else {
                    continue;
                };
                if let Some(f) = log_file.as_mut() {
                    writeln!(f, "{}", rec.csv_line())?;
                    f.flush()?;
                }
                if let Some(dir) = &opts.out_dir {
                    if opts.checkpoint_every > 0 && rec.step % opts.checkpoint_every == 0 {
                        let path = dir.join("checkpoints").join(format!("step-{:07}.cwpm", rec.step));
                        self.save_checkpoint(&path, &opts.meta)?;
                    }
                }
                if opts.max_generator_steps.is_some_and(|m| self.gen_steps >= m) {
                    break 'epochs;
                }
            }
            self.epoch += 1;
            self.batch_in_epoch = 0;
        }
        if let Some(dir) = &opts.out_dir {
            self.save_checkpoint(&dir.join(FINAL_CHECKPOINT), &opts.meta)?;
        }
        Ok(())
    }

    fn open_log(&self, dir: &Path) -> Result<BufWriter<File>> {
        fs::create_dir_all(dir.join("checkpoints")).map_err(Error::at_path(dir))?;
        let path = dir.join(LOG_FILE);
        let kept = if self.gen_steps > 0 && path.exists() {
            let mut old = TrainLog::read_csv(&path)?;
            old.records.retain(|r| r.step <= self.gen_steps);
            old.records
        } else {
            Vec::new()
        };
        let mut f = BufWriter::new(File::create(&path).map_err(Error::at_path(&path))?);
        writeln!(f, "{LOG_HEADER}")?;
        for r in kept {
            writeln!(f, "{}", r.csv_line())?;
        }
        f.flush()?;
        Ok(f)
    }
}
