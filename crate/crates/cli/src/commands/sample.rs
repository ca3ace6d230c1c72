use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use tdas_core::io::save_dataset;
use tdas_core::noise::label_seed;
use tdas_core::{sample_batch, FreqFilterParams, ImageDataset, TransformKind};

use super::export_images;
use crate::config::{ModelConfig, SampleConfig, SampleMode};
use crate::manifest::{absolute, RunManifest};

#[derive(Debug, Clone, Args)]
#[command(group = clap::ArgGroup::new("mode").args(["vanilla", "tdas"]))]
pub struct SampleArgs {
    /// JSON run config (or a previous run.json). Flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Use the empirical score of this dataset directory.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Unfiltered Langevin sampling.
    #[arg(long)]
    pub vanilla: bool,
    /// Filter the initial state and every noise draw.
    #[arg(long)]
    pub tdas: bool,
    /// Frequency-filter parameter JSON (from `tdas calibrate`).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Dataset directory whose pixel statistics define the space filter.
    #[arg(long)]
    pub space_mask: Option<PathBuf>,
    /// Total iterations; the step size grows to keep the summed step fixed.
    #[arg(long, conflicts_with = "accel")]
    pub iterations: Option<usize>,
    /// Acceleration factor k: k times fewer steps, k times larger.
    #[arg(long)]
    pub accel: Option<usize>,
    /// Largest noise level.
    #[arg(long)]
    pub sigma_max: Option<f64>,
    /// Smallest noise level.
    #[arg(long)]
    pub sigma_min: Option<f64>,
    /// Number of noise levels.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Steps per level before acceleration.
    #[arg(long)]
    pub steps_per_level: Option<usize>,
    /// Step size at the smallest noise level.
    #[arg(long)]
    pub eps0: Option<f64>,
    /// dct or dft.
    #[arg(long)]
    pub transform: Option<TransformKind>,
    /// Apply one Tweedie denoising step at the end.
    #[arg(long)]
    pub denoise_final: bool,
    /// Number of independent chains (one sample each).
    #[arg(long)]
    pub chains: Option<usize>,
    /// Master seed; chain streams are derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write PGM/PPM previews under OUT/images.
    #[arg(long)]
    pub images: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl SampleArgs {
    /// Config file (if any) with every given flag applied on top.
    pub fn resolve(&self) -> anyhow::Result<SampleConfig> {
        let mut cfg = match (&self.config, &self.dataset) {
            (Some(path), _) => SampleConfig::load(path)?,
            (None, Some(ds)) => SampleConfig::new(ModelConfig::Empirical { dataset: absolute(ds)? }),
            (None, None) => anyhow::bail!("need --config or --dataset"),
        };
        if let Some(ds) = &self.dataset {
            cfg.model = ModelConfig::Empirical { dataset: absolute(ds)? };
        }
        if self.vanilla {
            cfg.mode = Some(SampleMode::Vanilla);
        }
        if self.tdas {
            cfg.mode = Some(SampleMode::Tdas);
        }
        if let Some(p) = &self.params {
            let params = FreqFilterParams::load(p).with_context(|| format!("loading {}", p.display()))?;
            cfg.freq_params = Some(params);
        }
        if let Some(p) = &self.space_mask {
            cfg.space_mask = Some(absolute(p)?);
        }
        if self.iterations.is_some() || self.accel.is_some() {
            cfg.iterations = self.iterations;
            cfg.accel = self.accel;
        }
        macro_rules! override_field {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        override_field!(sigma_max, sigma_min, levels, steps_per_level, eps0, transform, chains, seed);
        cfg.denoise_final |= self.denoise_final;
        Ok(cfg)
    }
}

pub struct SampleOutcome {
    pub samples: ImageDataset,
    pub manifest: RunManifest,
}

pub fn run(args: &SampleArgs) -> anyhow::Result<SampleOutcome> {
    let cfg = args.resolve()?;
    let outcome = run_config(&cfg, &args.out, args.images)?;
    Ok(outcome)
}

pub fn run_config(cfg: &SampleConfig, out: &std::path::Path, images: bool) -> anyhow::Result<SampleOutcome> {
    let echo = serde_json::to_value(cfg)?;
    let mut manifest = RunManifest::new("sample", echo.clone(), Some(cfg.seed));
    let sampler = cfg.sampler_config()?;
    let (model, shape) = manifest.time("load", || cfg.build_model())?;
    let filter = manifest.time("filter", || cfg.build_filter(shape))?;
    if cfg.mode == Some(SampleMode::Tdas) && filter.is_identity() {
        log::warn!("tdas mode with identity masks; output equals vanilla sampling");
    }
    log::info!(
        "sampling {} chains, {} steps, accel {}",
        cfg.chains,
        sampler.total_steps(),
        sampler.accel_factor
    );
    let master = label_seed(cfg.seed, "sample/chains");
    let samples = manifest.time("sample", || sample_batch(model.as_ref(), &sampler, &filter, master, cfg.chains))?;
    let written = manifest.time("write", || save_dataset(&samples, out, echo))?;
    written.into_iter().for_each(|p| manifest.output(p));
    if images {
        export_images(&samples, out)?.into_iter().for_each(|p| manifest.output(p));
    }
    manifest.clone().write(out)?;
    Ok(SampleOutcome { samples, manifest })
}
