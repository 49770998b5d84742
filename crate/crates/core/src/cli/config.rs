use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{DataConfig, DatasetSpec, ForwardSpec, PriorSpec};
use crate::error::{Error, Result};
use crate::nn::{CriticConfig, GeneratorConfig};
use crate::posterior::{DEFAULT_DRAWS, DEFAULT_IMPORTANT};
use crate::probes::DEFAULT_RADIUS;
use crate::train::TrainConfig;

/// Network shapes; grid extents come from the dataset and the latent
/// dimension from `train.latent_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub channels: usize,
    pub depth: usize,
    pub leaky_slope: f64,
    pub cin_skip_first_up: bool,
    /// Defaults to `channels`.
    pub critic_channels: Option<usize>,
    /// Defaults to `depth`.
    pub critic_depth: Option<usize>,
    pub dense_widths: Vec<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            channels: 16,
            depth: 2,
            leaky_slope: 0.1,
            cin_skip_first_up: false,
            critic_channels: None,
            critic_depth: None,
            dense_widths: vec![],
        }
    }
}

impl NetworkConfig {
    pub fn generator(&self, height: usize, width: usize, latent_dim: usize) -> GeneratorConfig {
        GeneratorConfig {
            height,
            width,
            in_channels: 1,
            out_channels: 1,
            channels: self.channels,
            latent_dim,
            depth: self.depth,
            cin_skip_first_up: self.cin_skip_first_up,
            leaky_slope: self.leaky_slope,
        }
    }

    pub fn critic(&self, height: usize, width: usize) -> CriticConfig {
        CriticConfig {
            height,
            width,
            x_channels: 1,
            y_channels: 1,
            channels: self.critic_channels.unwrap_or(self.channels),
            depth: self.critic_depth.unwrap_or(self.depth),
            leaky_slope: self.leaky_slope,
            dense_widths: self.dense_widths.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Checkpoint every this many generator updates; `0` keeps only the final one.
    pub checkpoint_every: usize,
    /// Preview images written by `generate`.
    pub previews: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { checkpoint_every: 1000, previews: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferConfig {
    pub draws: usize,
    pub important: usize,
    /// Weighted draws for the importance-sampling reference.
    pub oracle_draws: usize,
    pub oracle_min_ess: f64,
}

impl Default for InferConfig {
    fn default() -> Self {
        InferConfig {
            draws: DEFAULT_DRAWS,
            important: DEFAULT_IMPORTANT,
            oracle_draws: 20_000,
            oracle_min_ess: 50.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub radius: f64,
    pub measurements: usize,
    pub latents: usize,
    /// Diffusivity, horizon and retained modes of the bump sweep.
    pub kappa: f64,
    pub t_final: f64,
    pub modes: usize,
    /// Nodes per side of the bump-sweep grid.
    pub grid: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            radius: DEFAULT_RADIUS,
            measurements: 100,
            latents: 10,
            kappa: 0.2,
            t_final: 1.0,
            modes: 25,
            grid: 28,
        }
    }
}

/// The whole run configuration, one TOML section per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub prior: PriorSpec,
    pub forward: ForwardSpec,
    pub data: DataConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub infer: InferConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
}

impl RunConfig {
    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            prior: self.prior.clone(),
            forward: self.forward.clone(),
            data: self.data.clone(),
        }
    }

    /// Reads `path`, applies `key=value` overrides and validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::at_path(path))?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let base: RunConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        let cfg = if overrides.is_empty() {
            base
        } else {
            // Round-trip through the fully defaulted table so that undotted
            // keys can be resolved against every field, set or not.
            let mut table = toml::Table::try_from(&base).map_err(|e| Error::invalid(format!("config: {e}")))?;
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            table.try_into().map_err(|e| Error::invalid(format!("config after overrides: {e}")))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.train.validate()?;
        if self.data.samples < 1 || self.data.grid < 2 {
            return Err(Error::invalid("data.samples must be >= 1 and data.grid >= 2"));
        }
        if self.infer.draws < 1 || self.infer.important < 1 || self.infer.important > self.infer.draws {
            return Err(Error::invalid("need 1 <= infer.important <= infer.draws"));
        }
        Ok(())
    }

    /// Routes a single seed to every stream.
    pub fn set_seed(&mut self, seed: u64) {
        self.data.seed = seed;
        self.train.rng_seed = seed;
    }
}

fn parse_value(raw: &str) -> toml::Value {
    // Bare words that are not TOML literals are taken as strings.
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// `section.key=value`, `a.b.c=value`, or an undotted `key=value` that names
/// a field of exactly one section.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("override {spec:?} is not of the form key=value")))?;
    let key = key.trim();
    let value = parse_value(raw.trim());
    let mut path: Vec<String> = key.split('.').map(str::to_string).collect();
    if path.len() == 1 {
        let owners: Vec<String> = table
            .iter()
            .filter(|(_, v)| v.as_table().is_some_and(|t| t.contains_key(key)))
            .map(|(k, _)| k.clone())
            .collect();
        match owners.as_slice() {
            [one] => path.insert(0, one.clone()),
            [] => return Err(Error::invalid(format!("override key {key:?} matches no config field"))),
            many => {
                return Err(Error::invalid(format!(
                    "override key {key:?} is ambiguous between sections {}; use section.{key}",
                    many.join(", ")
                )))
            }
        }
    }
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = table;
    for p in parents {
        node = node
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::invalid(format!("override {key:?}: {p} is not a section")))?;
    }
    node.insert(last.clone(), value);
    Ok(())
}
