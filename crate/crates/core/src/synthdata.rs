//! Synthetic image datasets with a controllable power-law spectrum and,
//! optionally, a shared spatial layout.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseSource;
use crate::scores::SpectralGaussianScore;
use crate::tensor::{ImageDataset, Shape, Tensor};
use crate::transforms::idct2;

/// Per-pixel standard deviation of the random field around its mean.
pub const FIELD_STD: f64 = 0.15;
/// Standard deviation of the perturbation added to the face template.
pub const PERTURBATION_STD: f64 = 0.05;
pub const TEMPLATE_FOREGROUND: f64 = 0.8;
pub const TEMPLATE_BACKGROUND: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    LowFreqBlobs,
    FaceLike,
    Unstructured,
}

impl std::str::FromStr for SynthKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low_freq_blobs" => Ok(SynthKind::LowFreqBlobs),
            "face_like" => Ok(SynthKind::FaceLike),
            "unstructured" => Ok(SynthKind::Unstructured),
            other => Err(format!("unknown dataset kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub count: usize,
    pub shape: Shape,
    pub spectral_decay: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidArgument("count must be at least 1".into()));
        }
        if !(self.spectral_decay > 0.0 && self.spectral_decay.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "spectral_decay must be positive, got {}",
                self.spectral_decay
            )));
        }
        Ok(())
    }
}

/// Standard deviation of DCT coefficient `(h, w)`: `(1 + rho)^(-p/2)`
/// with `rho` the index-space radius.
fn coefficient_std(h: usize, w: usize, p: f64) -> f64 {
    let rho = ((h * h + w * w) as f64).sqrt();
    (1.0 + rho).powf(-p / 2.0)
}

/// DCT-coefficient variances `gain^2 (1 + rho)^(-p)`, with the gain set so
/// the average per-pixel standard deviation is `std`.
fn coefficient_variances(shape: Shape, p: f64, std: f64) -> Tensor {
    let (_, h, w) = shape.as_tuple();
    let total_var: f64 = (0..h)
        .flat_map(|i| (0..w).map(move |j| coefficient_std(i, j, p).powi(2)))
        .sum();
    let gain2 = std * std / (total_var / (h * w) as f64);
    Tensor::from_fn(shape, |_, i, j| gain2 * coefficient_std(i, j, p).powi(2)).expect("finite variances")
}

/// Zero-mean field with the power spectrum of [`coefficient_variances`],
/// drawn independently per channel.
fn spectral_field(variances: &Tensor, src: &mut NoiseSource) -> Tensor {
    let coeffs = variances.map(|v| v.sqrt() * src.normal());
    idct2(&coeffs)
}

/// Bright ellipse on a dark background, identical in every channel.
pub fn face_template(shape: Shape) -> Tensor {
    let (_, h, w) = shape.as_tuple();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let (ay, ax) = (0.45 * h as f64, 0.35 * w as f64);
    Tensor::from_fn(shape, |_, i, j| {
        let (dy, dx) = ((i as f64 - cy) / ay, (j as f64 - cx) / ax);
        if dy * dy + dx * dx <= 1.0 {
            TEMPLATE_FOREGROUND
        } else {
            TEMPLATE_BACKGROUND
        }
    })
    .expect("template values are finite")
}

/// Mean image of each kind before the random field is added.
fn base_image(spec: &SynthSpec) -> Tensor {
    match spec.kind {
        SynthKind::FaceLike => face_template(spec.shape),
        _ => Tensor::filled(spec.shape, 0.5),
    }
}

fn field_variances(spec: &SynthSpec) -> Tensor {
    match spec.kind {
        SynthKind::LowFreqBlobs => coefficient_variances(spec.shape, spec.spectral_decay, FIELD_STD),
        SynthKind::FaceLike => coefficient_variances(spec.shape, spec.spectral_decay, PERTURBATION_STD),
        // white noise stays white under an orthonormal transform
        SynthKind::Unstructured => Tensor::filled(spec.shape, FIELD_STD * FIELD_STD),
    }
}

fn generate_item(spec: &SynthSpec, base: &Tensor, variances: &Tensor, index: usize) -> Tensor {
    let mut src = NoiseSource::for_stream(spec.seed, index as u64);
    let field = match spec.kind {
        SynthKind::Unstructured => src.draw_normal(spec.shape).scale(FIELD_STD),
        _ => spectral_field(variances, &mut src),
    };
    base.add(&field).expect("same shape")
}

/// Generates `spec.count` items; item `i` depends only on `(spec, i)`.
pub fn generate(spec: &SynthSpec) -> Result<ImageDataset> {
    spec.validate()?;
    let (base, variances) = (base_image(spec), field_variances(spec));
    let items: Vec<Tensor> = (0..spec.count)
        .into_par_iter()
        .map(|i| generate_item(spec, &base, &variances, i))
        .collect();
    ImageDataset::new(items)
}

/// The exact distribution the items of `spec` are drawn from, as a score
/// model (the population counterpart of an empirical score on the items).
pub fn population_model(spec: &SynthSpec) -> Result<SpectralGaussianScore> {
    spec.validate()?;
    SpectralGaussianScore::new(base_image(spec), field_variances(spec))
}
