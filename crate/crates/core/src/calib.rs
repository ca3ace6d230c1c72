//! Frequency statistics of sample sets and automatic frequency-mask
//! calibration.
//!
//! `phi(h, w)` is the channel-averaged mean spectral power, `gamma` the ratio
//! of a generated set's `phi` to a reference set's, and `kappa(r)` the mean of
//! `gamma` outside normalised radius `r`. The mask rates are
//! `ave(S) / Q_alpha(S)` over the multiset `S` of all `gamma` cells, and each
//! radius is the first point on the radial grid where `kappa` reaches the
//! matching quantile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{normalized_distance, FreqFilterParams};
use crate::tensor::{ImageDataset, Shape, Tensor};
use crate::transforms::{power_spectrum, TransformKind};

/// Floor applied to the denominator (and numerator) of a power ratio.
pub const RATIO_FLOOR: f64 = 1e-12;

/// Calibration sample count per task.
pub const DEFAULT_CALIBRATION_SAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct FreqStats {
    /// `1 x H x W` grid of mean power.
    pub power: Tensor,
    pub transform: TransformKind,
    pub sample_count: usize,
}

impl FreqStats {
    pub fn grid_shape(&self) -> Shape {
        self.power.shape()
    }

    /// Mean power per integer radial bin `round(sqrt(h^2 + w^2))`, using the
    /// wrapped distance for the DFT. Returns `(radius, mean power, cells)`.
    pub fn radial_profile(&self) -> Vec<(usize, f64, usize)> {
        let s = self.power.shape();
        let mut bins: Vec<(f64, usize)> = Vec::new();
        for h in 0..s.height {
            for w in 0..s.width {
                let (hh, ww) = match self.transform {
                    TransformKind::Dct => (h, w),
                    TransformKind::Dft => (h.min(s.height - h), w.min(s.width - w)),
                };
                let r = ((hh * hh + ww * ww) as f64).sqrt().round() as usize;
                if bins.len() <= r {
                    bins.resize(r + 1, (0.0, 0));
                }
                bins[r].0 += self.power[(0, h, w)];
                bins[r].1 += 1;
            }
        }
        bins.into_iter()
            .enumerate()
            .filter(|(_, (_, n))| *n > 0)
            .map(|(r, (sum, n))| (r, sum / n as f64, n))
            .collect()
    }
}

/// `power(h, w) = (1/C) * mean_i sum_c |T[x_i]|^2(c, h, w)`.
pub fn freq_power_stats(samples: &ImageDataset, transform: TransformKind) -> FreqStats {
    let shape = samples.shape();
    let plane = shape.plane();
    let mut acc = vec![0.0; plane];
    for x in samples.items() {
        let p = power_spectrum(x, transform);
        for ch in p.data().chunks_exact(plane) {
            for (a, v) in acc.iter_mut().zip(ch) {
                *a += v;
            }
        }
    }
    let norm = (samples.len() * shape.channels) as f64;
    acc.iter_mut().for_each(|a| *a /= norm);
    FreqStats {
        power: Tensor::from_vec_unchecked(shape.single_channel(), acc),
        transform,
        sample_count: samples.len(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioGrid {
    /// `1 x H x W`, strictly positive.
    pub gamma: Tensor,
    pub transform: TransformKind,
    /// Cells where a power fell below [`RATIO_FLOOR`] and was clamped.
    pub clamped_cells: usize,
}

impl RatioGrid {
    pub fn from_tensor(gamma: Tensor, transform: TransformKind) -> Result<Self> {
        if gamma.shape().channels != 1 {
            return Err(Error::InvalidArgument("ratio grids have one channel".into()));
        }
        if gamma.data().iter().any(|&g| !(g > 0.0)) {
            return Err(Error::InvalidArgument("ratio grid entries must be positive".into()));
        }
        Ok(RatioGrid {
            gamma,
            transform,
            clamped_cells: 0,
        })
    }

    pub fn values(&self) -> &[f64] {
        self.gamma.data()
    }

    pub fn mean(&self) -> f64 {
        self.gamma.mean()
    }
}

/// Elementwise `generated / reference`, flooring both powers at `floor`.
pub fn ratio_grid_with_floor(generated: &FreqStats, reference: &FreqStats, floor: f64) -> Result<RatioGrid> {
    if generated.transform != reference.transform {
        return Err(Error::InvalidArgument(format!(
            "transform mismatch: {} vs {}",
            generated.transform, reference.transform
        )));
    }
    generated.power.ensure_shape(reference.power.shape())?;
    let mut clamped = 0;
    let gamma = generated
        .power
        .zip_map(&reference.power, |g, r| {
            if g < floor || r < floor {
                clamped += 1;
            }
            g.max(floor) / r.max(floor)
        })?;
    if clamped > 0 {
        log::warn!("ratio grid: {clamped} cell(s) below the power floor {floor:e} were clamped");
    }
    Ok(RatioGrid {
        gamma,
        transform: generated.transform,
        clamped_cells: clamped,
    })
}

pub fn ratio_grid(generated: &FreqStats, reference: &FreqStats) -> Result<RatioGrid> {
    ratio_grid_with_floor(generated, reference, RATIO_FLOOR)
}

/// `Q_alpha(S) = min { x in S : #{y in S : y <= x} >= alpha * #S }`.
pub fn quantile(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("quantile of an empty set".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("quantile input contains NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Smallest k with k >= alpha * n; the k-th order statistic is the answer.
    let target = alpha * sorted.len() as f64;
    let k = (target.ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[k - 1])
}

/// Mean of `gamma` over cells with normalised `d0(h, w) >= 2 r^2`.
pub fn kappa(g: &RatioGrid, r: f64, distance: TransformKind) -> Result<f64> {
    let s = g.gamma.shape();
    let bound = 2.0 * r * r;
    let (mut sum, mut n) = (0.0, 0usize);
    for h in 0..s.height {
        for w in 0..s.width {
            if normalized_distance(h, w, s.height, s.width, distance) >= bound {
                sum += g.gamma[(0, h, w)];
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::InvalidArgument(format!("no frequency cells lie outside radius {r}")));
    }
    Ok(sum / n as f64)
}

/// `kappa` on the radial grid `r = j / max(H, W)`, `j = 0, 1, ...`, for as
/// long as the outside region is non-empty.
pub fn kappa_curve(g: &RatioGrid, distance: TransformKind) -> Vec<(f64, f64)> {
    let s = g.gamma.shape();
    let step = 1.0 / s.height.max(s.width) as f64;
    let mut d0: Vec<(f64, f64)> = Vec::with_capacity(s.plane());
    for h in 0..s.height {
        for w in 0..s.width {
            d0.push((normalized_distance(h, w, s.height, s.width, distance), g.gamma[(0, h, w)]));
        }
    }
    let max_d0 = d0.iter().map(|c| c.0).fold(0.0, f64::max);
    let mut curve = Vec::new();
    for j in 0.. {
        let r = j as f64 * step;
        let bound = 2.0 * r * r;
        if bound > max_d0 {
            break;
        }
        let (sum, n) = d0
            .iter()
            .filter(|c| c.0 >= bound)
            .fold((0.0, 0usize), |(s, n), c| (s + c.1, n + 1));
        curve.push((r, sum / n as f64));
    }
    curve
}

/// Which side of the ratio the generating model errs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibDirection {
    /// High frequencies amplified: `kappa` increasing, quantiles 0.75 / 0.9.
    Sgm,
    /// High frequencies shrunk: `kappa` decreasing, quantiles 0.25 / 0.1.
    Ddpm,
}

impl CalibDirection {
    pub fn quantile_levels(self) -> (f64, f64) {
        match self {
            CalibDirection::Sgm => (0.75, 0.9),
            CalibDirection::Ddpm => (0.25, 0.1),
        }
    }
}

impl std::str::FromStr for CalibDirection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sgm" => Ok(CalibDirection::Sgm),
            "ddpm" => Ok(CalibDirection::Ddpm),
            other => Err(format!("unknown direction '{other}' (expected sgm or ddpm)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub params: FreqFilterParams,
    pub direction: CalibDirection,
    pub average: f64,
    /// `(Q_a1, Q_a2)` at the direction's quantile levels.
    pub quantiles: (f64, f64),
    pub kappa_curve: Vec<(f64, f64)>,
}

/// Full calibration, keeping the scanned `kappa` curve.
pub fn calibrate(g: &RatioGrid, direction: CalibDirection, transform: TransformKind) -> Result<Calibration> {
    let values = g.values();
    let average = values.iter().sum::<f64>() / values.len() as f64;
    let (a1, a2) = direction.quantile_levels();
    let q1 = quantile(values, a1)?;
    let q2 = quantile(values, a2)?;
    let curve = kappa_curve(g, transform);

    let reached = |k: f64, q: f64| match direction {
        CalibDirection::Sgm => k >= q,
        CalibDirection::Ddpm => k <= q,
    };
    // radii must be positive, so the scan starts one grid step out
    let crossing = |q: f64| curve.iter().skip(1).find(|(_, k)| reached(*k, q)).map(|(r, _)| *r);
    let (r1, r2) = match (crossing(q1), crossing(q2)) {
        (Some(r1), Some(r2)) => (r1, r2),
        (c1, _) => {
            let (missing, q) = if c1.is_none() { (a1, q1) } else { (a2, q2) };
            return Err(Error::Calibration {
                reason: format!("kappa never reaches Q_{missing} = {q}"),
                kappa_curve: curve,
            });
        }
    };
    let params = FreqFilterParams::three_zone(average / q1, average / q2, r1, r2, transform)?;
    Ok(Calibration {
        params,
        direction,
        average,
        quantiles: (q1, q2),
        kappa_curve: curve,
    })
}

pub fn calc_freq_params(g: &RatioGrid, direction: CalibDirection, transform: TransformKind) -> Result<FreqFilterParams> {
    calibrate(g, direction, transform).map(|c| c.params)
}
