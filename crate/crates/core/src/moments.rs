//! Exact spectral moments of the sampler for DCT-diagonal Gaussian targets.
//!
//! With a score that is linear and diagonal in the DCT basis and noise
//! filtered by a DCT mask, every coefficient evolves independently:
//! `a <- c a + (eps/2) m / (v + sigma^2)` for the mean and `b <- c^2 b + eps f^2`
//! for the variance, with `c = 1 - eps / (2 (v + sigma^2))` and `f` the mask
//! value. The expected power is `a^2 + b`.

use crate::calib::FreqStats;
use crate::error::{Error, Result};
use crate::filters::TdasFilter;
use crate::sampler::SamplerConfig;
use crate::scores::{ScoreModel, SpectralGaussianScore};
use crate::tensor::Tensor;
use crate::transforms::TransformKind;

/// `E[D[x] * D[x]]` averaged over channels for the output of
/// [`crate::sampler::langevin_sample_filtered`] under `model`, `cfg` and
/// `filter`. Needs a DCT filter without a spatial mask.
pub fn expected_dct_power(model: &SpectralGaussianScore, cfg: &SamplerConfig, filter: &TdasFilter) -> Result<FreqStats> {
    cfg.validate()?;
    if filter.transform() != TransformKind::Dct || !filter.space().is_identity() {
        return Err(Error::InvalidArgument(
            "exact moments need a DCT filter with an identity space mask".into(),
        ));
    }
    let shape = model.shape().expect("spectral model has a fixed shape");
    filter.space().mask().ensure_shape(shape)?;
    let mask = filter.freq().data();
    let (target_mean, target_var) = (model.mean_coeffs().data(), model.variances().data());

    let mut mean = vec![0.0; shape.len()];
    let mut var: Vec<f64> = mask.iter().map(|f| f * f).collect();
    for step in cfg.schedule() {
        let s2 = step.sigma * step.sigma;
        for i in 0..shape.len() {
            let v = target_var[i] + s2;
            let c = 1.0 - step.eps / (2.0 * v);
            mean[i] = c * mean[i] + step.eps / 2.0 * target_mean[i] / v;
            var[i] = c * c * var[i] + step.eps * mask[i] * mask[i];
        }
    }
    if cfg.denoise_final {
        let s2 = cfg.levels.sigma_min().powi(2);
        for i in 0..shape.len() {
            let keep = target_var[i] / (target_var[i] + s2);
            mean[i] = keep * mean[i] + (1.0 - keep) * target_mean[i];
            var[i] *= keep * keep;
        }
    }

    let (c, h, w) = shape.as_tuple();
    let mut power = vec![0.0; h * w];
    for ch in 0..c {
        for (j, p) in power.iter_mut().enumerate() {
            let i = ch * h * w + j;
            *p += (mean[i] * mean[i] + var[i]) / c as f64;
        }
    }
    if power.iter().any(|p| !p.is_finite()) {
        return Err(Error::Divergence { step: 0, sigma: cfg.levels.sigma_min() });
    }
    Ok(FreqStats {
        power: Tensor::from_vec(shape.single_channel(), power)?,
        transform: TransformKind::Dct,
        sample_count: 1,
    })
}
