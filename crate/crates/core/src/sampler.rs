//! Annealed Langevin sampling with filtered noise, in the spatial domain and
//! conjugated by an orthogonal map.
//!
//! One step is `x <- x + (eps/2) * s(x, sigma_i) + sqrt(eps) * eta` with
//! `eps = accel * eps0 * sigma_i^2 / sigma_L^2` and `eta` the filtered draw.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{SpaceFilter, TdasFilter};
use crate::noise::NoiseSource;
use crate::scores::{NoiseLevels, ScoreModel};
use crate::tensor::{ImageDataset, Shape, Tensor};
use crate::transforms::{OrthogonalMap, TransformKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub levels: NoiseLevels,
    /// Base step size at the smallest noise level.
    pub eps0: f64,
    /// Step-size multiplier `k`; 1 is the unaccelerated schedule.
    pub accel_factor: f64,
    pub transform: TransformKind,
    #[serde(default)]
    pub record_trajectory: bool,
    /// Add `sigma_L^2 * s(x, sigma_L)` once after the last step.
    #[serde(default)]
    pub denoise_final: bool,
}

/// One Langevin step of the schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub sigma: f64,
    pub eps: f64,
}

impl SamplerConfig {
    pub fn new(levels: NoiseLevels, eps0: f64, transform: TransformKind) -> Result<Self> {
        let cfg = SamplerConfig {
            levels,
            eps0,
            accel_factor: 1.0,
            transform,
            record_trajectory: false,
            denoise_final: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps0.is_finite() && self.eps0 > 0.0) {
            return Err(Error::InvalidArgument(format!("eps0 must be positive, got {}", self.eps0)));
        }
        if !(self.accel_factor.is_finite() && self.accel_factor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "accel_factor must be positive, got {}",
                self.accel_factor
            )));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.levels.total_steps()
    }

    /// Reduces the iteration count by `k` (per level) and scales the step size
    /// by `k`, keeping the summed step size fixed.
    pub fn accelerated(&self, k: usize) -> Result<Self> {
        let spl = self.levels.steps_per_level();
        if k == 0 || spl % k != 0 {
            return Err(Error::InvalidArgument(format!(
                "acceleration {k} does not divide {spl} steps per level"
            )));
        }
        Ok(SamplerConfig {
            levels: self.levels.with_steps_per_level(spl / k)?,
            accel_factor: self.accel_factor * k as f64,
            ..self.clone()
        })
    }

    /// Runs `iterations` total steps, accelerated relative to this config's
    /// iteration count.
    pub fn with_iterations(&self, iterations: usize) -> Result<Self> {
        let total = self.total_steps();
        if iterations == 0 || total % iterations != 0 {
            return Err(Error::InvalidArgument(format!(
                "{iterations} iterations does not divide the reference {total}"
            )));
        }
        self.accelerated(total / iterations)
    }

    pub fn schedule(&self) -> Vec<Step> {
        let sl2 = self.levels.sigma_min().powi(2);
        self.levels
            .sigmas()
            .iter()
            .flat_map(|&sigma| {
                let eps = self.accel_factor * self.eps0 * sigma * sigma / sl2;
                std::iter::repeat(Step { sigma, eps }).take(self.levels.steps_per_level())
            })
            .collect()
    }
}

/// States `x_T, ..., x_0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Tensor>,
}

#[derive(Debug, Clone)]
pub struct SampleRun {
    pub sample: Tensor,
    pub trajectory: Option<Trajectory>,
}

fn score_at(model: &dyn ScoreModel, x: &Tensor, sigma: f64, step: usize) -> Result<Tensor> {
    match model.score(x, sigma) {
        Err(Error::NonFinite(_)) => Err(Error::Divergence { step, sigma }),
        other => other,
    }
}

/// `x + (eps/2) * s + sqrt(eps) * eta`, evaluated left to right.
fn langevin_update(x: &mut Tensor, score: &Tensor, eta: &Tensor, step: Step) {
    let half_eps = step.eps / 2.0;
    let sqrt_eps = step.eps.sqrt();
    for ((xv, s), n) in x.data_mut().iter_mut().zip(score.data()).zip(eta.data()) {
        *xv = *xv + half_eps * s + sqrt_eps * n;
    }
}

fn score_batch_at(model: &dyn ScoreModel, xs: &[Tensor], sigma: f64, step: usize) -> Result<Vec<Tensor>> {
    match model.score_batch(xs, sigma) {
        Err(Error::NonFinite(_)) => Err(Error::Divergence { step, sigma }),
        other => other,
    }
}

fn ensure_finite_at(x: &Tensor, step: usize, sigma: f64) -> Result<()> {
    x.ensure_finite().map_err(|_| Error::Divergence { step, sigma })
}

pub(crate) fn spatial_loop(
    model: &dyn ScoreModel,
    schedule: &[Step],
    filter: &TdasFilter,
    src: &mut NoiseSource,
    record: bool,
) -> Result<(Tensor, Option<Trajectory>)> {
    let shape = filter.shape();
    let mut x = filter.apply(&src.draw_normal(shape))?;
    let mut traj = record.then(|| Trajectory {
        states: vec![x.clone()],
    });
    let total = schedule.len();
    for (i, &step) in schedule.iter().enumerate() {
        let t = total - i;
        let eta = filter.apply(&src.draw_normal(shape))?;
        let score = score_at(model, &x, step.sigma, t)?;
        langevin_update(&mut x, &score, &eta, step);
        ensure_finite_at(&x, t, step.sigma)?;
        if let Some(tr) = traj.as_mut() {
            tr.states.push(x.clone());
        }
    }
    Ok((x, traj))
}

pub(crate) fn frequency_loop(
    model: &dyn ScoreModel,
    schedule: &[Step],
    shape: Shape,
    map: &dyn OrthogonalMap,
    src: &mut NoiseSource,
    record: bool,
) -> Result<(Tensor, Option<Trajectory>)> {
    let mut xt = map.forward(&src.draw_normal(shape));
    let mut traj = record.then(|| Trajectory {
        states: vec![xt.clone()],
    });
    let total = schedule.len();
    for (i, &step) in schedule.iter().enumerate() {
        let t = total - i;
        let noise = map.forward(&src.draw_normal(shape));
        let score = map.forward(&score_at(model, &map.inverse(&xt), step.sigma, t)?);
        langevin_update(&mut xt, &score, &noise, step);
        ensure_finite_at(&xt, t, step.sigma)?;
        if let Some(tr) = traj.as_mut() {
            tr.states.push(xt.clone());
        }
    }
    Ok((xt, traj))
}

fn denoise(model: &dyn ScoreModel, x: Tensor, sigma: f64) -> Result<Tensor> {
    let s = score_at(model, &x, sigma, 0)?;
    let out = x.add(&s.scale(sigma * sigma))?;
    ensure_finite_at(&out, 0, sigma)?;
    Ok(out)
}

/// Filtered annealed Langevin sampling: initial sample and every additive
/// noise pass through `filter`.
pub fn langevin_sample_filtered(
    model: &dyn ScoreModel,
    cfg: &SamplerConfig,
    src: &mut NoiseSource,
    filter: &TdasFilter,
) -> Result<SampleRun> {
    cfg.validate()?;
    if let Some(s) = model.shape() {
        filter.space().mask().ensure_shape(s)?;
    }
    let (mut x, trajectory) = spatial_loop(model, &cfg.schedule(), filter, src, cfg.record_trajectory)?;
    if cfg.denoise_final {
        x = denoise(model, x, cfg.levels.sigma_min())?;
    }
    Ok(SampleRun {
        sample: x,
        trajectory,
    })
}

pub fn langevin_sample(
    model: &dyn ScoreModel,
    cfg: &SamplerConfig,
    src: &mut NoiseSource,
    space: &SpaceFilter,
    freq: &Tensor,
) -> Result<SampleRun> {
    let filter = TdasFilter::new(space.clone(), freq.clone(), cfg.transform)?;
    langevin_sample_filtered(model, cfg, src, &filter)
}

/// Unfiltered sampling run as `x~ = F x`: the score is taken in the spatial
/// domain and mapped through `F`, the noise is `F z`. The returned sample is
/// mapped back; a recorded trajectory holds the transformed states `x~_t`.
pub fn freq_domain_sample(
    model: &dyn ScoreModel,
    cfg: &SamplerConfig,
    shape: Shape,
    src: &mut NoiseSource,
    map: &dyn OrthogonalMap,
) -> Result<SampleRun> {
    cfg.validate()?;
    let (xt, trajectory) = frequency_loop(model, &cfg.schedule(), shape, map, src, cfg.record_trajectory)?;
    let mut x = map.inverse(&xt);
    if cfg.denoise_final {
        x = denoise(model, x, cfg.levels.sigma_min())?;
    }
    Ok(SampleRun {
        sample: x,
        trajectory,
    })
}

/// Chains advanced together so batched scores can share cached data.
const CHAIN_BLOCK: usize = 16;

/// Lockstep version of [`spatial_loop`] over one stream per chain; each chain
/// sees exactly the arithmetic of a solo run.
fn spatial_block(
    model: &dyn ScoreModel,
    cfg: &SamplerConfig,
    filter: &TdasFilter,
    srcs: &mut [NoiseSource],
) -> Result<Vec<Tensor>> {
    let shape = filter.shape();
    let schedule = cfg.schedule();
    let mut xs = srcs
        .iter_mut()
        .map(|src| filter.apply(&src.draw_normal(shape)))
        .collect::<Result<Vec<_>>>()?;
    let total = schedule.len();
    for (i, &step) in schedule.iter().enumerate() {
        let t = total - i;
        let etas = srcs
            .iter_mut()
            .map(|src| filter.apply(&src.draw_normal(shape)))
            .collect::<Result<Vec<_>>>()?;
        let scores = score_batch_at(model, &xs, step.sigma, t)?;
        for ((x, s), eta) in xs.iter_mut().zip(&scores).zip(&etas) {
            langevin_update(x, s, eta, step);
            ensure_finite_at(x, t, step.sigma)?;
        }
    }
    if cfg.denoise_final {
        let sigma = cfg.levels.sigma_min();
        let scores = score_batch_at(model, &xs, sigma, 0)?;
        xs = xs
            .iter()
            .zip(&scores)
            .map(|(x, s)| {
                let out = x.add(&s.scale(sigma * sigma))?;
                ensure_finite_at(&out, 0, sigma)?;
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(xs)
}

/// Runs `chains` independent chains in parallel. Chain `i` owns the stream
/// `NoiseSource::for_stream(master_seed, i)` and its result equals a solo
/// [`langevin_sample_filtered`] run on that stream, whatever the scheduling.
pub fn sample_batch(
    model: &dyn ScoreModel,
    cfg: &SamplerConfig,
    filter: &TdasFilter,
    master_seed: u64,
    chains: usize,
) -> Result<ImageDataset> {
    if chains == 0 {
        return Err(Error::InvalidArgument("need at least one chain".into()));
    }
    cfg.validate()?;
    if let Some(s) = model.shape() {
        filter.space().mask().ensure_shape(s)?;
    }
    let blocks: Vec<Vec<u64>> = (0..chains as u64)
        .collect::<Vec<_>>()
        .chunks(CHAIN_BLOCK)
        .map(|c| c.to_vec())
        .collect();
    let items = blocks
        .into_par_iter()
        .map(|ids| {
            let mut srcs: Vec<NoiseSource> = ids.iter().map(|&i| NoiseSource::for_stream(master_seed, i)).collect();
            spatial_block(model, cfg, filter, &mut srcs)
        })
        .collect::<Result<Vec<_>>>()?;
    ImageDataset::new(items.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::{geometric_levels, GaussianScore, ZeroScore};
    use crate::transforms::Dct2Map;

    fn cfg(steps: usize) -> SamplerConfig {
        SamplerConfig::new(geometric_levels(1.0, 0.1, 4, steps).unwrap(), 1e-3, TransformKind::Dct).unwrap()
    }

    #[test]
    fn acceleration_preserves_summed_step_size() {
        let base = cfg(50);
        let fast = base.accelerated(5).unwrap();
        assert_eq!(fast.total_steps(), base.total_steps() / 5);
        let a: f64 = base.schedule().iter().map(|s| s.eps).sum();
        let b: f64 = fast.schedule().iter().map(|s| s.eps).sum();
        assert!((a - b).abs() < 1e-9);
        assert!(base.accelerated(3).is_err());
        assert_eq!(base.with_iterations(40).unwrap(), fast);
    }

    #[test]
    fn unit_acceleration_keeps_schedule() {
        let c = cfg(3);
        let s = c.schedule();
        assert_eq!(s.len(), 12);
        assert!((s[0].eps - 0.1).abs() < 1e-15);
        assert!((s[11].eps - 1e-3).abs() < 1e-15);
        assert_eq!(c.accelerated(1).unwrap(), c);
    }

    #[test]
    fn trajectory_has_t_plus_one_states() {
        let mut c = cfg(2);
        c.record_trajectory = true;
        let s = Shape::new(1, 3, 3).unwrap();
        let run = langevin_sample_filtered(&GaussianScore::standard(s), &c, &mut NoiseSource::new(1), &TdasFilter::identity(s, TransformKind::Dct)).unwrap();
        let tr = run.trajectory.unwrap();
        assert_eq!(tr.states.len(), 9);
        assert_eq!(tr.states.last().unwrap(), &run.sample);
    }

    #[test]
    fn divergence_names_the_step() {
        // eps/s0^2 far above 4 makes the Gaussian chain blow up.
        let s = Shape::new(1, 2, 2).unwrap();
        let levels = NoiseLevels::new(vec![1.0], 5000).unwrap();
        let c = SamplerConfig::new(levels, 50.0, TransformKind::Dct).unwrap();
        let g = GaussianScore::new(Tensor::zeros(s), 1.0).unwrap();
        let err = langevin_sample_filtered(&g, &c, &mut NoiseSource::new(0), &TdasFilter::identity(s, TransformKind::Dct)).unwrap_err();
        match err {
            Error::Divergence { step, .. } => assert!(step > 0 && step < 5000),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn score_free_runs_agree_across_domains() {
        let s = Shape::new(1, 6, 5).unwrap();
        let c = cfg(5);
        let a = langevin_sample_filtered(&ZeroScore, &c, &mut NoiseSource::new(3), &TdasFilter::identity(s, TransformKind::Dct)).unwrap();
        let b = freq_domain_sample(&ZeroScore, &c, s, &mut NoiseSource::new(3), &Dct2Map).unwrap();
        assert!(a.sample.max_abs_diff(&b.sample).unwrap() < 1e-10);
    }

    #[test]
    fn batch_is_deterministic() {
        let s = Shape::new(1, 3, 3).unwrap();
        let g = GaussianScore::standard(s);
        let f = TdasFilter::identity(s, TransformKind::Dct);
        let a = sample_batch(&g, &cfg(2), &f, 11, 4).unwrap();
        let b = sample_batch(&g, &cfg(2), &f, 11, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.items()[0], a.items()[1]);
    }
}
