//! The `cwgan` command line: `generate`, `train`, `infer`, `probe` and `eval`.
//!
//! Every subcommand writes into a run directory (`--out`) and is
//! deterministic given its seed and configuration. Configuration errors exit
//! with status 2, every other failure with status 1.

mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use config::{apply_override, InferConfig, NetworkConfig, OutputConfig, ProbeConfig, RunConfig};

use crate::autograd::Tensor;
use crate::data::{build_dataset, load_tensor, read_dataset, write_pgm_auto, Dataset, DatasetManifest};
use crate::error::Error;
use crate::nn::{Critic, Generator};
use crate::pde::{Field, Grid2D};
use crate::posterior::{
    export_field, export_json, generate_snapshots, l1_error, reference_posterior, rrqr_select, StatisticFunctional,
};
use crate::probes::{
    bump_sweep, concentration_ratio, gradient_map, probe_lattice, ring_averages, uniform_baseline, GradientMap,
    LocalityReport, ProbeRecord, SweepConfig,
};
use crate::rng::stream;
use crate::train::{Checkpoint, TrainOptions, Trainer, FINAL_CHECKPOINT};

pub const DATASET_DIR: &str = "dataset";
pub const RESOLVED_CONFIG: &str = "config.toml";

#[derive(Debug, Parser)]
#[command(name = "cwgan", version, about = "Posterior sampling for PDE inverse problems with conditional WGANs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directory; created if absent.
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    /// Seed for every random stream; overrides the configured seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `section.key=value` or `key=value`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the prior, solve the forward model and write a dataset.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train generator and critic on a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset directory; defaults to `<out>/dataset`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Posterior mean, SD and most informative samples for one measurement.
    Infer {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/final.cwpm`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Measurement tensor (`.cwt`) on the checkpoint's grid.
        #[arg(long, conflicts_with = "dataset")]
        measurement: Option<PathBuf>,
        /// Take the measurement from this dataset instead.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Number of latent draws `K`.
        #[arg(long)]
        draws: Option<usize>,
        /// Number of important samples kept by the pivoted QR.
        #[arg(long)]
        important: Option<usize>,
        /// Also compute importance-sampling reference statistics.
        #[arg(long)]
        oracle: bool,
        /// Directory for the statistics; defaults to `<out>/infer`.
        #[arg(long)]
        into: Option<PathBuf>,
    },
    /// Locality probes of the inverse map and of a trained generator.
    Probe {
        #[command(flatten)]
        common: Common,
        /// Bump sweep through the regularized backward heat solve.
        #[arg(long)]
        fft: bool,
        /// Averaged input gradients of a trained generator.
        #[arg(long)]
        grad: bool,
        /// Number of probe pixels, taken from the 2x3 lattice.
        #[arg(long, default_value_t = 6)]
        pixels: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Measurements for `--grad`; defaults to `<out>/dataset`.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// L1 distance between the statistics in two summary directories.
    Eval {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
}

/// A problem with the configuration or the command line (exit status 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Process exit status for a failed run.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ConfigError>().is_some() {
        2
    } else {
        1
    }
}

fn config_error(e: impl fmt::Display) -> anyhow::Error {
    ConfigError(e.to_string()).into()
}

fn load_config(common: &Common) -> anyhow::Result<RunConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| config_error("this subcommand needs --config"))?;
    if !path.is_file() {
        return Err(config_error(format!("config file {} does not exist", path.display())));
    }
    let mut cfg = RunConfig::load(path, &common.overrides).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    if let Some(s) = common.seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

fn optional_config(common: &Common) -> anyhow::Result<Option<RunConfig>> {
    match common.config {
        Some(_) => load_config(common).map(Some),
        None if !common.overrides.is_empty() => Err(config_error("--override needs --config")),
        None => Ok(None),
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate { common } => cmd_generate(&common),
        Command::Train { common, data, resume } => cmd_train(&common, data, resume),
        Command::Infer { common, checkpoint, measurement, dataset, index, draws, important, oracle, into } => {
            let req = InferRequest { checkpoint, measurement, dataset, index, draws, important, oracle, into };
            cmd_infer(&common, req)
        }
        Command::Probe { common, fft, grad, pixels, checkpoint, dataset } => {
            cmd_probe(&common, fft, grad, pixels, checkpoint, dataset)
        }
        Command::Eval { a, b, out } => cmd_eval(&a, &b, &out),
    }
}

fn cmd_generate(common: &Common) -> anyhow::Result<()> {
    let cfg = load_config(common)?;
    create_dir(&common.out)?;
    let dir = common.out.join(DATASET_DIR);
    let manifest = build_dataset(&cfg.dataset_spec(), &dir)?;
    write_resolved(&common.out, &cfg)?;
    let n = cfg.output.previews.min(manifest.count);
    if n > 0 {
        let ds = read_dataset(&dir)?;
        let preview = common.out.join("preview");
        create_dir(&preview)?;
        for i in 0..n {
            write_pgm_auto(&preview.join(format!("pair-{i}-x.pgm")), &record_field(&ds, ds.pairs.x(), i)?)?;
            write_pgm_auto(&preview.join(format!("pair-{i}-y.pgm")), &record_field(&ds, ds.pairs.y(), i)?)?;
        }
    }
    eprintln!(
        "wrote {} pairs ({} skipped) to {}, noise sigma {:.4}",
        manifest.count,
        manifest.skipped.len(),
        dir.display(),
        manifest.noise_sigma
    );
    Ok(())
}

fn write_resolved(out: &Path, cfg: &RunConfig) -> anyhow::Result<()> {
    let text = toml::to_string(cfg).context("serializing the resolved config")?;
    let path = out.join(RESOLVED_CONFIG);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

/// Record `i` of an `M x H x W x 1` dataset tensor as a field.
pub fn record_field(ds: &Dataset, t: &Tensor<f32>, i: usize) -> anyhow::Result<Field> {
    let grid = ds.manifest.grid()?;
    let n = grid.len();
    if i >= ds.manifest.count {
        bail!("record {i} out of range for a dataset of {}", ds.manifest.count);
    }
    let values = t.data()[i * n..(i + 1) * n].iter().map(|&v| v as f64).collect();
    Ok(Field::new(grid, values)?)
}

/// What a checkpoint carries besides parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub config: RunConfig,
    pub dataset: DatasetManifest,
}

fn networks(cfg: &RunConfig, m: &DatasetManifest) -> anyhow::Result<(Generator, Critic)> {
    let g = Generator::new(cfg.network.generator(m.height, m.width, cfg.train.latent_dim))?;
    let c = Critic::new(cfg.network.critic(m.height, m.width))?;
    Ok((g, c))
}

fn cmd_train(common: &Common, data: Option<PathBuf>, resume: Option<PathBuf>) -> anyhow::Result<()> {
    let cfg = load_config(common)?;
    let dir = data.unwrap_or_else(|| common.out.join(DATASET_DIR));
    let ds = read_dataset(&dir).with_context(|| format!("reading dataset {}", dir.display()))?;
    let (gen, critic) = networks(&cfg, &ds.manifest)?;
    let meta = RunMeta { config: cfg.clone(), dataset: ds.manifest.clone() };
    let opts = TrainOptions {
        out_dir: Some(common.out.clone()),
        checkpoint_every: cfg.output.checkpoint_every,
        max_generator_steps: None,
        meta: serde_json::to_value(&meta)?,
    };
    let mut trainer = match &resume {
        Some(path) => {
            let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            Trainer::<f32, _, _>::resume(&gen, &critic, &ck, Some(cfg.train.epochs))?
        }
        None => Trainer::<f32, _, _>::new(&gen, &critic, cfg.train.clone())?,
    };
    create_dir(&common.out)?;
    write_resolved(&common.out, &cfg)?;
    let from = trainer.generator_steps();
    trainer.run(&ds.pairs, &opts)?;
    eprintln!(
        "trained generator steps {}..{} over {} epochs; checkpoint {}",
        from,
        trainer.generator_steps(),
        trainer.epoch(),
        common.out.join(FINAL_CHECKPOINT).display()
    );
    Ok(())
}

struct InferRequest {
    checkpoint: Option<PathBuf>,
    measurement: Option<PathBuf>,
    dataset: Option<PathBuf>,
    index: usize,
    draws: Option<usize>,
    important: Option<usize>,
    oracle: bool,
    into: Option<PathBuf>,
}

/// A checkpoint together with the configuration and grid it was trained on.
pub struct LoadedModel {
    pub generator: Generator,
    pub params: crate::nn::ParamStore<f32>,
    pub meta: RunMeta,
    pub grid: Grid2D,
}

pub fn load_model(path: &Path) -> anyhow::Result<LoadedModel> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let meta: RunMeta = serde_json::from_value(ck.meta.meta.clone())
        .with_context(|| format!("{} carries no run metadata", path.display()))?;
    let (generator, _) = networks(&meta.config, &meta.dataset)?;
    let grid = meta.dataset.grid()?;
    Ok(LoadedModel { generator, params: ck.generator(), meta, grid })
}

fn measurement_field(path: &Path, grid: &Grid2D) -> anyhow::Result<Field> {
    let t = load_tensor(path).with_context(|| format!("reading measurement {}", path.display()))?;
    let dims: Vec<usize> = t.shape().iter().copied().filter(|&d| d != 1).collect();
    if dims != [grid.n2, grid.n1] {
        bail!(
            "measurement shape {:?} does not match the checkpoint grid [{}, {}]",
            t.shape(),
            grid.n2,
            grid.n1
        );
    }
    Ok(Field::new(*grid, t.data().iter().map(|&v| v as f64).collect())?)
}

#[derive(Serialize)]
struct InferSummary {
    draws: usize,
    seed: u64,
    index: usize,
    pivots: Vec<usize>,
    height: usize,
    width: usize,
}

#[derive(Serialize)]
struct OracleReport {
    draws: usize,
    ess: f64,
    sigma: f64,
    seed: u64,
}

fn cmd_infer(common: &Common, req: InferRequest) -> anyhow::Result<()> {
    let model = load_model(&req.checkpoint.clone().unwrap_or_else(|| common.out.join(FINAL_CHECKPOINT)))?;
    let mut infer = optional_config(common)?.map(|c| c.infer).unwrap_or_else(|| model.meta.config.infer.clone());
    if let Some(k) = req.draws {
        infer.draws = k;
    }
    if let Some(r) = req.important {
        infer.important = r;
    }
    if infer.draws < 1 {
        return Err(config_error("--draws must be at least 1"));
    }
    let seed = common.seed.unwrap_or(model.meta.config.train.rng_seed);
    let out = req.into.clone().unwrap_or_else(|| common.out.join("infer"));
    let (y, truth) = match (&req.measurement, &req.dataset) {
        (Some(p), _) => (measurement_field(p, &model.grid)?, None),
        (None, Some(dir)) => {
            let ds = read_dataset(dir).with_context(|| format!("reading dataset {}", dir.display()))?;
            let g = ds.manifest.grid()?;
            if g != model.grid {
                bail!(
                    "dataset grid {}x{} does not match the checkpoint grid {}x{}",
                    g.n2,
                    g.n1,
                    model.grid.n2,
                    model.grid.n1
                );
            }
            (record_field(&ds, ds.pairs.y(), req.index)?, Some(record_field(&ds, ds.pairs.x(), req.index)?))
        }
        (None, None) => return Err(config_error("infer needs --measurement or --dataset")),
    };
    let mut rng = stream(seed, "infer", req.index as u64);
    let snaps = generate_snapshots(&model.generator, &model.params, &y, infer.draws, 100, &mut rng)?;
    let (mean, sd) = snaps.mean_sd();
    let r = infer.important.min(infer.draws);
    let pivots = rrqr_select(&snaps.columns, r)?;
    let g = model.grid;
    export_field(&out, "measurement", &g, &y.values)?;
    if let Some(x) = &truth {
        export_field(&out, "truth", &g, &x.values)?;
    }
    export_field(&out, "mean", &g, &mean)?;
    export_field(&out, "sd", &g, &sd)?;
    for (rank, &p) in pivots.iter().enumerate() {
        export_field(&out, &format!("important-{rank}"), &g, &snaps.columns[p])?;
    }
    let second = StatisticFunctional::PixelSecondMoment.estimate(&snaps);
    export_field(&out, "second-moment", &g, &second)?;
    let summary = InferSummary { draws: infer.draws, seed, index: req.index, pivots, height: g.n2, width: g.n1 };
    export_json(&out, "summary.json", &summary)?;
    if req.oracle {
        let m = &model.meta.dataset;
        let o = reference_posterior(
            &y,
            &m.prior,
            &m.forward,
            m.noise_sigma,
            infer.oracle_draws,
            infer.oracle_min_ess,
            seed,
        )?;
        let odir = out.join("oracle");
        export_field(&odir, "mean", &g, &o.mean)?;
        export_field(&odir, "sd", &g, &o.sd)?;
        let report = OracleReport { draws: o.draws, ess: o.ess, sigma: m.noise_sigma, seed };
        export_json(&odir, "summary.json", &report)?;
        eprintln!("reference statistics from {} weighted draws, ESS {:.1}", o.draws, o.ess);
    }
    eprintln!("posterior statistics from {} draws written to {}", infer.draws, out.display());
    Ok(())
}

fn cmd_probe(
    common: &Common,
    fft: bool,
    grad: bool,
    pixels: usize,
    checkpoint: Option<PathBuf>,
    dataset: Option<PathBuf>,
) -> anyhow::Result<()> {
    if !fft && !grad {
        return Err(config_error("probe needs --fft, --grad or both"));
    }
    let cfg = optional_config(common)?;
    if fft {
        let pc = cfg.as_ref().map(|c| c.probe.clone()).unwrap_or_default();
        let grid = Grid2D::heat(pc.grid)?;
        let probes = lattice(&grid, pixels)?;
        let sweep = SweepConfig { kappa: pc.kappa, t_final: pc.t_final, modes: pc.modes, sigma: crate::pde::BUMP_SIGMA };
        let images = bump_sweep(&grid, &probes, &sweep)?;
        let dir = common.out.join("fft");
        let mut report = LocalityReport::default();
        for (&(i, j), img) in probes.iter().zip(&images) {
            export_field(&dir, &format!("response-{i}-{j}"), &grid, &img.values)?;
            let abs = Field::new(grid, img.values.iter().map(|v| v.abs()).collect())?;
            let map = GradientMap { pixel: grid.index(i, j), map: abs, n_y: 1, n_z: 1 };
            report.probes.push(record(&map, i, j, pc.radius)?);
            report.rings.push(ring_averages(img, (i, j)).into_iter().map(|(_, v)| v).collect());
        }
        export_json(&dir, "report.json", &report)?;
        eprintln!("bump sweep over {} centers written to {}", grid.len(), dir.display());
    }
    if grad {
        let model = load_model(&checkpoint.unwrap_or_else(|| common.out.join(FINAL_CHECKPOINT)))?;
        let pc = cfg.map(|c| c.probe).unwrap_or_else(|| model.meta.config.probe.clone());
        let dir = dataset.unwrap_or_else(|| common.out.join(DATASET_DIR));
        let ds = read_dataset(&dir).with_context(|| format!("reading dataset {}", dir.display()))?;
        let n_y = pc.measurements.min(ds.manifest.count);
        let ys: Vec<Field> = (0..n_y).map(|i| record_field(&ds, ds.pairs.y(), i)).collect::<anyhow::Result<_>>()?;
        let probes = lattice(&model.grid, pixels)?;
        let seed = common.seed.unwrap_or(model.meta.config.train.rng_seed);
        let out = common.out.join("grad");
        let mut report = LocalityReport::default();
        for (n, &(i, j)) in probes.iter().enumerate() {
            let k = model.grid.index(i, j);
            let mut rng = stream(seed, "probe", n as u64);
            let map = gradient_map(&model.generator, &model.params, k, &ys, pc.latents, &mut rng)?;
            export_field(&out, &format!("grad-{i}-{j}"), &model.grid, &map.map.values)?;
            report.probes.push(record(&map, i, j, pc.radius)?);
        }
        export_json(&out, "report.json", &report)?;
        eprintln!(
            "gradient maps for {} pixels written to {}; worst concentration gain {:.2}",
            probes.len(),
            out.display(),
            report.worst_gain()
        );
    }
    Ok(())
}

fn lattice(grid: &Grid2D, pixels: usize) -> anyhow::Result<Vec<(usize, usize)>> {
    let all = probe_lattice(grid);
    if pixels < 1 || pixels > all.len() {
        return Err(config_error(format!("--pixels must be between 1 and {}", all.len())));
    }
    Ok(all.into_iter().take(pixels).collect())
}

fn record(map: &GradientMap, row: usize, col: usize, radius: f64) -> anyhow::Result<ProbeRecord> {
    Ok(ProbeRecord {
        row,
        col,
        pixel: map.pixel,
        ratio: concentration_ratio(map, radius)?,
        baseline: uniform_baseline(&map.map.grid, map.pixel, radius),
        radius,
    })
}

fn summary_field(dir: &Path, name: &str) -> anyhow::Result<Field> {
    let path = dir.join(format!("{name}.cwt"));
    let t = load_tensor(&path).with_context(|| format!("reading {}", path.display()))?;
    let [h, w] = t.shape() else {
        bail!("{} is not a 2-D statistic: shape {:?}", path.display(), t.shape());
    };
    let grid = Grid2D::new(*w, *h, (0.0, 1.0), (0.0, 1.0))?;
    Ok(Field::new(grid, t.data().iter().map(|&v| v as f64).collect())?)
}

fn cmd_eval(a: &Path, b: &Path, out: &Path) -> anyhow::Result<()> {
    let mut rows = String::from("statistic,l1\n");
    for name in ["mean", "sd"] {
        let (fa, fb) = (summary_field(a, name)?, summary_field(b, name)?);
        let e = l1_error(&fa, &fb).map_err(|e| match e {
            Error::Shape { .. } => anyhow::anyhow!(
                "{name}: grids differ ({}x{} vs {}x{})",
                fa.grid.n2,
                fa.grid.n1,
                fb.grid.n2,
                fb.grid.n1
            ),
            other => other.into(),
        })?;
        rows.push_str(&format!("{name},{e}\n"));
        println!("{name} L1 {e:.6}");
    }
    create_dir(out)?;
    let path = out.join("metrics.csv");
    fs::write(&path, rows).with_context(|| format!("writing {}", path.display()))
}
