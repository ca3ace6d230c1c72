//! Run configuration for `tdas sample`. Files are JSON; flags override fields.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use tdas_core::io::load_dataset;
use tdas_core::{
    build_space_mask, geometric_levels, population_model, EmpiricalScore, FreqFilterParams, GaussianScore, SamplerConfig,
    ScoreModel, Shape, SpaceFilter, SynthSpec, TdasFilter, Tensor, TransformKind,
};

/// Where the score comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Exact score of the smoothed empirical distribution of a dataset.
    Empirical { dataset: PathBuf },
    /// `N(mean, std^2 I)`.
    Gaussian { shape: Shape, mean: f64, std: f64 },
    /// The Gaussian population a synthetic spec draws from.
    Population { spec: SynthSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    Vanilla,
    Tdas,
}

fn default_sigma_max() -> f64 {
    7.0
}
fn default_sigma_min() -> f64 {
    0.05
}
fn default_levels() -> usize {
    10
}
fn default_steps_per_level() -> usize {
    200
}
fn default_eps0() -> f64 {
    7.5e-4
}
fn default_transform() -> TransformKind {
    TransformKind::Dct
}
fn default_chains() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub model: ModelConfig,
    #[serde(default = "default_sigma_max")]
    pub sigma_max: f64,
    #[serde(default = "default_sigma_min")]
    pub sigma_min: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Steps per level of the unaccelerated schedule.
    #[serde(default = "default_steps_per_level")]
    pub steps_per_level: usize,
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    #[serde(default = "default_transform")]
    pub transform: TransformKind,
    #[serde(default)]
    pub denoise_final: bool,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default)]
    pub seed: u64,
    /// Total iterations to run; the schedule is accelerated to match.
    #[serde(default)]
    pub iterations: Option<usize>,
    /// Acceleration factor; exclusive with `iterations`.
    #[serde(default)]
    pub accel: Option<usize>,
    #[serde(default)]
    pub mode: Option<SampleMode>,
    /// Frequency filter for TDAS; identity when absent.
    #[serde(default)]
    pub freq_params: Option<FreqFilterParams>,
    /// Dataset whose statistics define the space filter; identity when absent.
    #[serde(default)]
    pub space_mask: Option<PathBuf>,
}

impl SampleConfig {
    pub fn new(model: ModelConfig) -> Self {
        SampleConfig {
            model,
            sigma_max: default_sigma_max(),
            sigma_min: default_sigma_min(),
            levels: default_levels(),
            steps_per_level: default_steps_per_level(),
            eps0: default_eps0(),
            transform: default_transform(),
            denoise_final: false,
            chains: default_chains(),
            seed: 0,
            iterations: None,
            accel: None,
            mode: None,
            freq_params: None,
            space_mask: None,
        }
    }

    /// Reads a config file, or the `config` field of a run manifest. Relative
    /// paths are taken relative to the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let mut value: serde_json::Value = serde_json::from_slice(&raw)?;
        if value.get("command").is_some() {
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
        }
        let mut cfg: SampleConfig =
            serde_json::from_value(value).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let ModelConfig::Empirical { dataset } = &mut self.model {
            fix(dataset);
        }
        if let Some(p) = &mut self.space_mask {
            fix(p);
        }
    }

    pub fn sampler_config(&self) -> anyhow::Result<SamplerConfig> {
        let levels = geometric_levels(self.sigma_max, self.sigma_min, self.levels, self.steps_per_level)?;
        let mut cfg = SamplerConfig::new(levels, self.eps0, self.transform)?;
        cfg.denoise_final = self.denoise_final;
        Ok(match (self.iterations, self.accel) {
            (Some(_), Some(_)) => anyhow::bail!("iterations and accel are mutually exclusive"),
            (Some(t), None) => cfg.with_iterations(t)?,
            (None, Some(k)) => cfg.accelerated(k)?,
            (None, None) => cfg,
        })
    }

    pub fn build_model(&self) -> anyhow::Result<(Box<dyn ScoreModel>, Shape)> {
        Ok(match &self.model {
            ModelConfig::Empirical { dataset } => {
                let ds = load_dataset(dataset).with_context(|| format!("loading dataset {}", dataset.display()))?;
                let shape = ds.shape();
                (Box::new(EmpiricalScore::new(&ds)), shape)
            }
            ModelConfig::Gaussian { shape, mean, std } => {
                let shape = Shape::new(shape.channels, shape.height, shape.width)?;
                (Box::new(GaussianScore::new(Tensor::filled(shape, *mean), *std)?), shape)
            }
            ModelConfig::Population { spec } => (Box::new(population_model(spec)?), spec.shape),
        })
    }

    pub fn build_filter(&self, shape: Shape) -> anyhow::Result<TdasFilter> {
        let mode = self.mode.context("choose a mode: --vanilla or --tdas")?;
        if mode == SampleMode::Vanilla {
            return Ok(TdasFilter::identity(shape, self.transform));
        }
        let space = match &self.space_mask {
            Some(dir) => {
                let ds = load_dataset(dir).with_context(|| format!("loading space-mask dataset {}", dir.display()))?;
                build_space_mask(&ds)?
            }
            None => SpaceFilter::identity(shape),
        };
        let params = self.freq_params.unwrap_or_else(|| FreqFilterParams::identity(self.transform));
        if params.transform != self.transform {
            anyhow::bail!(
                "filter parameters are for {} but the sampler uses {}",
                params.transform.name(),
                self.transform.name()
            );
        }
        Ok(TdasFilter::from_params(space, &params)?)
    }
}
