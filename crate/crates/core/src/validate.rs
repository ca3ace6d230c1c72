//! Numerical checks of the orthogonal-invariance identity and of the
//! deviation decomposition, plus desk-scale sample-quality metrics.

use serde::{Deserialize, Serialize};

use crate::calib::{freq_power_stats, ratio_grid};
use crate::error::{Error, Result};
use crate::filters::TdasFilter;
use crate::noise::NoiseSource;
use crate::sampler::{frequency_loop, spatial_loop, SamplerConfig};
use crate::scores::ScoreModel;
use crate::tensor::{ImageDataset, Shape, Tensor};
use crate::transforms::{OrthogonalMap, TransformKind};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sample mean and its standard error.
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut s = CompensatedSum::default();
    values.iter().for_each(|&v| s.add(v));
    let mean = s.total() / n;
    let mut ss = CompensatedSum::default();
    values.iter().for_each(|&v| ss.add((v - mean) * (v - mean)));
    let var = if values.len() > 1 { ss.total() / (n - 1.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

/// Runs the spatial chain and its conjugate under `map` on one shared noise
/// stream for the first `steps` steps of `cfg`, returning
/// `max_t ||x~_t - F x_t||_inf`.
pub fn check_theorem1(
    model: &dyn ScoreModel,
    cfg: &SamplerConfig,
    shape: Shape,
    seed: u64,
    steps: usize,
    map: &dyn OrthogonalMap,
) -> Result<f64> {
    cfg.validate()?;
    let schedule = cfg.schedule();
    if steps > schedule.len() {
        return Err(Error::InvalidArgument(format!(
            "{steps} steps requested but the schedule has {}",
            schedule.len()
        )));
    }
    let schedule = &schedule[..steps];
    let identity = TdasFilter::identity(shape, cfg.transform);
    let (_, spatial) = spatial_loop(model, schedule, &identity, &mut NoiseSource::new(seed), true)?;
    let (_, freq) = frequency_loop(model, schedule, shape, map, &mut NoiseSource::new(seed), true)?;
    let (spatial, freq) = (spatial.unwrap(), freq.unwrap());
    let mut worst = 0.0f64;
    for (x, xt) in spatial.states.iter().zip(&freq.states) {
        worst = worst.max(map.forward(x).max_abs_diff(xt)?);
    }
    Ok(worst)
}

/// How the additive noise relates to the target draw in the deviation check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseCoupling {
    /// `z ~ N(0, I)` drawn independently of `x*`.
    Independent,
    /// `z = x*`.
    Aligned,
    /// `z = -x*`.
    AntiAligned,
}

impl std::str::FromStr for NoiseCoupling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "independent" => Ok(NoiseCoupling::Independent),
            "aligned" => Ok(NoiseCoupling::Aligned),
            "anti_aligned" | "anti-aligned" => Ok(NoiseCoupling::AntiAligned),
            other => Err(format!("unknown coupling '{other}'")),
        }
    }
}

/// Monte-Carlo estimate of `E||x* - x_{t-1}||^2` next to its three-term
/// decomposition, all from the same draws of `(x*, z)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviationReport {
    pub coupling: NoiseCoupling,
    pub eps: f64,
    pub lhs: f64,
    /// `E||x* - x_t - (eps/2) s(x_t)||^2`
    pub c1_term: f64,
    /// `eps * E||z||^2`
    pub variance_term: f64,
    /// `2 sqrt(eps) E[x* . z]`, subtracted in the decomposition.
    pub correlation_term: f64,
    pub mc_samples: usize,
    /// Standard error of `lhs`.
    pub standard_error: f64,
    /// `lhs - (c1 - correlation + variance)`; a mean-zero cross term.
    pub residual: f64,
    pub residual_standard_error: f64,
    pub consistent: bool,
    #[serde(skip)]
    lhs_draws: Vec<f64>,
    #[serde(skip)]
    target_norm_sq: Vec<f64>,
}

/// Absolute slack for residuals that are zero up to round-off.
fn roundoff_slack(scale: f64) -> f64 {
    1e-9 * (1.0 + scale.abs())
}

pub fn check_theorem2(
    model: &dyn ScoreModel,
    sigma: f64,
    x_t: &Tensor,
    coupling: NoiseCoupling,
    eps: f64,
    n_mc: usize,
    seed: u64,
) -> Result<DeviationReport> {
    if n_mc < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 Monte-Carlo draws, got {n_mc}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let score = model.score(x_t, sigma)?;
    // drift-only point x_t + (eps/2) s(x_t)
    let drift = x_t.add(&score.scale(eps / 2.0))?;
    let sqrt_eps = eps.sqrt();
    let mut targets = NoiseSource::for_label(seed, "theorem2/target");
    let mut noises = NoiseSource::for_label(seed, "theorem2/noise");

    let mut lhs = Vec::with_capacity(n_mc);
    let mut c1 = Vec::with_capacity(n_mc);
    let mut var = Vec::with_capacity(n_mc);
    let mut corr = Vec::with_capacity(n_mc);
    let mut cross = Vec::with_capacity(n_mc);
    let mut norms = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let xs = model.sample_target(&mut targets)?;
        xs.ensure_shape(x_t.shape())?;
        let z = match coupling {
            NoiseCoupling::Independent => noises.draw_normal(x_t.shape()),
            NoiseCoupling::Aligned => xs.clone(),
            NoiseCoupling::AntiAligned => xs.scale(-1.0),
        };
        let next = drift.add(&z.scale(sqrt_eps))?;
        lhs.push(xs.sub(&next)?.norm_sq());
        c1.push(xs.sub(&drift)?.norm_sq());
        var.push(eps * z.norm_sq());
        corr.push(2.0 * sqrt_eps * xs.dot(&z)?);
        cross.push(2.0 * sqrt_eps * drift.dot(&z)?);
        norms.push(xs.norm_sq());
    }
    let (lhs_mean, lhs_se) = mean_se(&lhs);
    let (c1_mean, _) = mean_se(&c1);
    let (var_mean, _) = mean_se(&var);
    let (corr_mean, _) = mean_se(&corr);
    let (_, cross_se) = mean_se(&cross);
    let residual = lhs_mean - (c1_mean + var_mean - corr_mean);
    let consistent = residual.abs() <= 4.0 * cross_se + roundoff_slack(lhs_mean);
    Ok(DeviationReport {
        coupling,
        eps,
        lhs: lhs_mean,
        c1_term: c1_mean,
        variance_term: var_mean,
        correlation_term: corr_mean,
        mc_samples: n_mc,
        standard_error: lhs_se,
        residual,
        residual_standard_error: cross_se,
        consistent,
        lhs_draws: lhs,
        target_norm_sq: norms,
    })
}

/// Paired comparison of two couplings run on the same target draws.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeComparison {
    /// `mean(lhs_baseline - lhs_other)`
    pub gap: f64,
    /// `2 sqrt(eps) * mean ||x*||^2`
    pub expected_gap: f64,
    pub standard_error: f64,
    pub within_band: bool,
}

/// Checks that `other` lowers the deviation of `baseline` by
/// `2 sqrt(eps) E||x*||^2`, which is the aligned-noise prediction.
pub fn compare_regimes(baseline: &DeviationReport, other: &DeviationReport) -> Result<RegimeComparison> {
    if baseline.target_norm_sq != other.target_norm_sq || baseline.eps != other.eps {
        return Err(Error::InvalidArgument(
            "regimes must share eps and the target draws (same seed)".into(),
        ));
    }
    let coef = 2.0 * baseline.eps.sqrt();
    let gaps: Vec<f64> = baseline
        .lhs_draws
        .iter()
        .zip(&other.lhs_draws)
        .map(|(a, b)| a - b)
        .collect();
    let diff: Vec<f64> = gaps
        .iter()
        .zip(&baseline.target_norm_sq)
        .map(|(g, n)| g - coef * n)
        .collect();
    let (gap, _) = mean_se(&gaps);
    let (expected_gap, _) = mean_se(&baseline.target_norm_sq.iter().map(|n| coef * n).collect::<Vec<_>>());
    let (d, se) = mean_se(&diff);
    Ok(RegimeComparison {
        gap,
        expected_gap,
        standard_error: se,
        within_band: d.abs() <= 4.0 * se + roundoff_slack(expected_gap),
    })
}

/// Mean over frequency cells of `|ln gamma|` between two sample sets.
pub fn spectral_deviation(samples: &ImageDataset, reference: &ImageDataset, transform: TransformKind) -> Result<f64> {
    if samples.shape() != reference.shape() {
        return Err(Error::ShapeMismatch {
            expected: reference.shape().as_tuple(),
            actual: samples.shape().as_tuple(),
        });
    }
    let rs = freq_power_stats(reference, transform);
    if rs.power.max() <= 0.0 {
        return Err(Error::DegenerateDataset("reference set has no spectral power".into()));
    }
    let ss = freq_power_stats(samples, transform);
    let g = ratio_grid(&ss, &rs)?;
    let mut acc = CompensatedSum::default();
    g.values().iter().for_each(|v| acc.add(v.ln().abs()));
    Ok(acc.total() / g.values().len() as f64)
}

/// Exact `W_2` between two empirical 1D distributions with uniform weights.
pub fn wasserstein2_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    // walk the merged quantile breakpoints i/n and j/m
    let (mut i, mut j) = (0, 0);
    let mut u = 0.0;
    let mut acc = CompensatedSum::default();
    while i < n && j < m {
        let (ni, nj) = ((i + 1) * m, (j + 1) * n);
        let next = ni.min(nj) as f64 / (n * m) as f64;
        let d = a[i] - b[j];
        acc.add((next - u) * d * d);
        u = next;
        if ni <= nj {
            i += 1;
        }
        if nj <= ni {
            j += 1;
        }
    }
    Ok(acc.total().max(0.0).sqrt())
}

fn flatten(ds: &ImageDataset) -> Vec<&[f64]> {
    ds.items().iter().map(|t| t.data()).collect()
}

/// Sliced `W_2` along explicit (unit) directions.
pub fn sliced_wasserstein_along(a: &ImageDataset, b: &ImageDataset, directions: &[Vec<f64>]) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: a.shape().as_tuple(),
            actual: b.shape().as_tuple(),
        });
    }
    if directions.is_empty() {
        return Err(Error::InvalidArgument("need at least one projection".into()));
    }
    let (fa, fb) = (flatten(a), flatten(b));
    let project = |pts: &[&[f64]], dir: &[f64]| -> Vec<f64> {
        pts.iter()
            .map(|p| p.iter().zip(dir).map(|(x, d)| x * d).sum())
            .collect()
    };
    let mut acc = CompensatedSum::default();
    for dir in directions {
        if dir.len() != a.shape().len() {
            return Err(Error::InvalidArgument("projection has the wrong dimension".into()));
        }
        acc.add(wasserstein2_1d(&project(&fa, dir), &project(&fb, dir))?);
    }
    Ok(acc.total() / directions.len() as f64)
}

/// Uniformly distributed unit directions in `R^dim`.
pub fn random_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut src = NoiseSource::for_label(seed, "sliced-wasserstein/directions");
    (0..count)
        .map(|_| loop {
            let mut v = vec![0.0; dim];
            src.fill_normal(&mut v);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
                break v;
            }
        })
        .collect()
}

/// Average 1D `W_2` over `n_projections` random unit projections.
pub fn sliced_wasserstein(a: &ImageDataset, b: &ImageDataset, n_projections: usize, seed: u64) -> Result<f64> {
    if n_projections == 0 {
        return Err(Error::InvalidArgument("need at least one projection".into()));
    }
    sliced_wasserstein_along(a, b, &random_directions(a.shape().len(), n_projections, seed))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityMetrics {
    pub spectral_deviation: f64,
    pub sliced_wasserstein: f64,
}

pub fn quality_metrics(
    samples: &ImageDataset,
    reference: &ImageDataset,
    transform: TransformKind,
    n_projections: usize,
    seed: u64,
) -> Result<QualityMetrics> {
    Ok(QualityMetrics {
        spectral_deviation: spectral_deviation(samples, reference, transform)?,
        sliced_wasserstein: sliced_wasserstein(samples, reference, n_projections, seed)?,
    })
}
