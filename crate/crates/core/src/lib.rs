//! Target distribution aware sampling (TDAS) for score-based generative
//! models: spatial and frequency preconditioning of annealed Langevin
//! dynamics, mask calibration from spectral statistics, and numerical
//! validation harnesses.

pub mod calib;
pub mod error;
pub mod filters;
pub mod io;
pub mod moments;
pub mod noise;
pub mod sampler;
pub mod scores;
pub mod synthdata;
pub mod tensor;
pub mod transforms;
pub mod validate;

pub use calib::{calc_freq_params, calibrate, freq_power_stats, ratio_grid, CalibDirection, Calibration, FreqStats, RatioGrid};
pub use error::{Error, Result};
pub use filters::{apply_tdas, build_freq_mask, build_space_mask, FreqFilterParams, SpaceFilter, TdasFilter};
pub use noise::NoiseSource;
pub use sampler::{langevin_sample, sample_batch, SampleRun, SamplerConfig, Trajectory};
pub use scores::{geometric_levels, EmpiricalScore, GaussianScore, NoiseLevels, ScoreModel, SpectralGaussianScore, ZeroScore};
pub use synthdata::{generate, population_model, SynthKind, SynthSpec};
pub use tensor::{ImageDataset, Shape, Tensor};
pub use transforms::TransformKind;
