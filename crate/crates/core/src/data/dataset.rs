use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pairs::FieldPairs;
use super::prior::{add_noise, Prior, PriorSpec};
use super::tensor_io::{read_f32s, read_header, write_tensor, OffsetReader};
use crate::autograd::Tensor;
use crate::error::{Error, Result};
use crate::pde::{heat_forward_fd, steady_conduction_fem, Field, Grid2D, HeatConfig};
use crate::rng::stream;

pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.cwt";

/// The physics that turns a field into a clean measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ForwardSpec {
    /// Initial temperature to temperature at `t_final` on `[0, 2 pi]^2`.
    Heat(HeatConfig),
    /// Conductivity to steady temperature on the unit square.
    Conduction {
        #[serde(default = "ten")]
        source: f64,
    },
}

fn ten() -> f64 {
    10.0
}

impl ForwardSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ForwardSpec::Heat(_) => "heat",
            ForwardSpec::Conduction { .. } => "conduction",
        }
    }

    /// The `n x n` grid this model is posed on.
    pub fn grid(&self, n: usize) -> Result<Grid2D> {
        match self {
            ForwardSpec::Heat(_) => Grid2D::heat(n),
            ForwardSpec::Conduction { .. } => Grid2D::unit(n),
        }
    }

    pub fn solve(&self, x: &Field) -> Result<Field> {
        match self {
            ForwardSpec::Heat(cfg) => heat_forward_fd(x, cfg),
            ForwardSpec::Conduction { source } => steady_conduction_fem(x, *source),
        }
    }
}

/// Measurement noise level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    Sigma(f64),
    /// Variance of the noise; `sigma` is its square root.
    Variance(f64),
    /// `sigma` as a fraction of the largest clean value in the dataset.
    FractionOfMax(f64),
}

impl NoiseSpec {
    pub fn resolve(&self, clean_max: f64) -> Result<f64> {
        let s = match *self {
            NoiseSpec::Sigma(s) => s,
            NoiseSpec::Variance(v) if v >= 0.0 => v.sqrt(),
            NoiseSpec::FractionOfMax(f) => f * clean_max,
            NoiseSpec::Variance(v) => v,
        };
        if s >= 0.0 && s.is_finite() {
            Ok(s)
        } else {
            Err(Error::invalid(format!("noise {self:?} resolves to invalid sigma {s}")))
        }
    }
}

/// Size, grid, noise and seed of a generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub samples: usize,
    /// Nodes per side.
    pub grid: usize,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub seed: u64,
}

/// Everything needed to regenerate a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub prior: PriorSpec,
    pub forward: ForwardSpec,
    pub data: DataConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub prior: PriorSpec,
    pub forward: ForwardSpec,
    pub noise: NoiseSpec,
    /// The resolved absolute noise level.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Indices whose forward solve failed and were left out.
    #[serde(default)]
    pub skipped: Vec<usize>,
}

impl DatasetManifest {
    pub fn grid(&self) -> Result<Grid2D> {
        let g = self.forward.grid(self.width)?;
        if self.height != self.width {
            return Err(Error::invalid("only square dataset grids are supported"));
        }
        Ok(g)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let f = File::open(&path).map_err(Error::at_path(&path))?;
        let m: DatasetManifest = serde_json::from_reader(BufReader::new(f))?;
        if m.format_version != DATASET_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "dataset format version {} is not supported (expected {DATASET_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut f = BufWriter::new(File::create(&path).map_err(Error::at_path(&path))?);
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }
}

/// One stored sample: inferred field, noisy and clean measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldPair {
    pub x: Field,
    pub y: Field,
    pub clean_y: Field,
}

fn as_f32(f: &Field) -> Vec<f32> {
    f.values.iter().map(|&v| v as f32).collect()
}

/// Appends records to `records.cwt`; [`DatasetWriter::finish`] writes the manifest.
pub struct DatasetWriter {
    dir: PathBuf,
    out: BufWriter<File>,
    count: usize,
    dims: Option<(usize, usize)>,
}

impl DatasetWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(Error::at_path(dir))?;
        let path = dir.join(RECORDS_FILE);
        let out = BufWriter::new(File::create(&path).map_err(Error::at_path(&path))?);
        Ok(DatasetWriter {
            dir: dir.to_path_buf(),
            out,
            count: 0,
            dims: None,
        })
    }

    pub fn push_raw(&mut self, h: usize, w: usize, x: &[f32], y: &[f32], clean: &[f32]) -> Result<()> {
        if *self.dims.get_or_insert((h, w)) != (h, w) {
            return Err(Error::shape("dataset-writer", format!("record {} is {h}x{w}", self.count)));
        }
        for t in [x, y, clean] {
            if t.len() != h * w {
                return Err(Error::shape("dataset-writer", "record tensor length differs from grid"));
            }
            write_tensor(&mut self.out, &[h, w], t)?;
        }
        self.count += 1;
        Ok(())
    }

    pub fn push(&mut self, p: &FieldPair) -> Result<()> {
        let g = p.x.grid;
        if p.y.grid != g || p.clean_y.grid != g {
            return Err(Error::shape("dataset-writer", "pair fields live on different grids"));
        }
        self.push_raw(g.n2, g.n1, &as_f32(&p.x), &as_f32(&p.y), &as_f32(&p.clean_y))
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Flushes records and writes the manifest with the final record count.
    pub fn finish(mut self, mut manifest: DatasetManifest) -> Result<DatasetManifest> {
        self.out.flush()?;
        manifest.count = self.count;
        if let Some((h, w)) = self.dims {
            manifest.height = h;
            manifest.width = w;
        }
        manifest.save(&self.dir)?;
        Ok(manifest)
    }
}

pub fn write_dataset(dir: &Path, pairs: &[FieldPair], manifest: DatasetManifest) -> Result<DatasetManifest> {
    let mut w = DatasetWriter::create(dir)?;
    for p in pairs {
        w.push(p)?;
    }
    w.finish(manifest)
}

/// A loaded dataset. Tensors are `M x H x W x 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub pairs: FieldPairs<f32>,
    pub clean_y: Tensor<f32>,
}

/// Reads a dataset directory record by record into preallocated tensors.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = DatasetManifest::load(dir)?;
    let (m, h, w) = (manifest.count, manifest.height, manifest.width);
    let n = h * w;
    let path = dir.join(RECORDS_FILE);
    let file = File::open(&path).map_err(Error::at_path(&path))?;
    let mut r = OffsetReader::new(BufReader::new(file));
    let mut bufs = [Vec::with_capacity(m * n), Vec::with_capacity(m * n), Vec::with_capacity(m * n)];
    for index in 0..m {
        for (buf, what) in bufs.iter_mut().zip(["x", "y", "clean y"]) {
            let tag = |e: Error| match e {
                Error::Format { offset, msg } => Error::Record {
                    index,
                    msg: format!("{what}: {msg} (byte {offset}); the file is truncated or corrupt"),
                },
                other => other,
            };
            let shape = read_header(&mut r).map_err(tag)?;
            if shape != [h, w] {
                return Err(Error::Record {
                    index,
                    msg: format!("{what} has shape {shape:?}, manifest says {h}x{w}"),
                });
            }
            read_f32s(&mut r, n, buf).map_err(tag)?;
        }
    }
    r.at_end().map_err(|e| Error::Record {
        index: m,
        msg: format!("records continue past the manifest count {m}: {e}"),
    })?;
    let [x, y, c] = bufs;
    let shape = vec![m, h, w, 1];
    Ok(Dataset {
        pairs: FieldPairs::new(Tensor::new(shape.clone(), x)?, Tensor::new(shape.clone(), y)?)?,
        clean_y: Tensor::new(shape, c)?,
        manifest,
    })
}

/// Samples, solves and perturbs `spec.data.samples` pairs into `dir`.
///
/// Record `i` draws from the streams `(seed, "prior", i)` and
/// `(seed, "noise", i)`, so the output does not depend on thread count.
/// Records whose forward solve fails are skipped and listed in the manifest.
pub fn build_dataset(spec: &DatasetSpec, dir: &Path) -> Result<DatasetManifest> {
    let d = &spec.data;
    if d.samples < 1 {
        return Err(Error::invalid("a dataset needs at least one sample"));
    }
    let grid = spec.forward.grid(d.grid)?;
    let prior = Prior::new(&spec.prior, grid)?;
    if let Some(cap) = prior.capacity() {
        if cap < d.samples {
            return Err(Error::invalid(format!("{} samples requested from {cap} images", d.samples)));
        }
    }
    let solved: Vec<Result<(Vec<f32>, Vec<f32>)>> = (0..d.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(d.seed, "prior", i as u64);
            let x = prior.sample(i, &mut rng)?;
            let clean = spec.forward.solve(&x)?;
            Ok((as_f32(&x), as_f32(&clean)))
        })
        .collect();
    let mut skipped = Vec::new();
    let mut kept = Vec::with_capacity(solved.len());
    for (i, r) in solved.into_iter().enumerate() {
        match r {
            Ok(v) => kept.push((i, v)),
            Err(e) => {
                eprintln!("warning: record {i} skipped: {e}");
                skipped.push(i);
            }
        }
    }
    let clean_max = kept
        .iter()
        .flat_map(|(_, (_, c))| c.iter())
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
    let sigma = d.noise.resolve(clean_max)?;
    let noisy: Vec<Vec<f32>> = kept
        .par_iter()
        .map(|(i, (_, clean))| {
            let mut rng = stream(d.seed, "noise", *i as u64);
            let c = Field::new(grid, clean.iter().map(|&v| v as f64).collect())?;
            Ok(as_f32(&add_noise(&c, sigma, &mut rng)?))
        })
        .collect::<Result<_>>()?;
    let mut w = DatasetWriter::create(dir)?;
    for ((_, (x, clean)), y) in kept.iter().zip(&noisy) {
        w.push_raw(grid.n2, grid.n1, x, y, clean)?;
    }
    w.finish(DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        count: 0,
        height: grid.n2,
        width: grid.n1,
        prior: spec.prior.clone(),
        forward: spec.forward.clone(),
        noise: d.noise,
        noise_sigma: sigma,
        seed: d.seed,
        skipped,
    })
}
