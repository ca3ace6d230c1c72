//! Closed-form scores `grad_x log p_sigma(x)` for Gaussian-smoothed targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseSource;
use crate::tensor::{ImageDataset, Shape, Tensor};
use crate::transforms::{dct2, idct2};

/// Noise-conditional score of a target density smoothed at level `sigma`.
pub trait ScoreModel: Send + Sync {
    /// Shape of the tensors the model accepts, when it is fixed.
    fn shape(&self) -> Option<Shape>;

    fn score(&self, x: &Tensor, sigma: f64) -> Result<Tensor>;

    /// Scores of several points at one noise level. Must agree bit for bit
    /// with calling [`ScoreModel::score`] on each point.
    fn score_batch(&self, xs: &[Tensor], sigma: f64) -> Result<Vec<Tensor>> {
        xs.iter().map(|x| self.score(x, sigma)).collect()
    }

    /// Exact `log p_sigma(x)`, normalising constant included.
    fn log_density(&self, x: &Tensor, sigma: f64) -> Result<f64>;

    /// One draw from the unsmoothed target.
    fn sample_target(&self, src: &mut NoiseSource) -> Result<Tensor>;
}

fn check_shape(model: &dyn ScoreModel, x: &Tensor) -> Result<()> {
    match model.shape() {
        Some(s) => x.ensure_shape(s),
        None => Ok(()),
    }
}

/// `N(mu, s0^2 I)` smoothed to `N(mu, (s0^2 + sigma^2) I)`.
#[derive(Debug, Clone)]
pub struct GaussianScore {
    mu: Tensor,
    s0: f64,
}

impl GaussianScore {
    pub fn new(mu: Tensor, s0: f64) -> Result<Self> {
        if !(s0.is_finite() && s0 >= 0.0) {
            return Err(Error::InvalidArgument(format!("s0 must be >= 0, got {s0}")));
        }
        Ok(GaussianScore { mu, s0 })
    }

    pub fn standard(shape: Shape) -> Self {
        GaussianScore {
            mu: Tensor::zeros(shape),
            s0: 1.0,
        }
    }

    pub fn mu(&self) -> &Tensor {
        &self.mu
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    fn variance(&self, sigma: f64) -> Result<f64> {
        let v = self.s0 * self.s0 + sigma * sigma;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "smoothed variance must be positive (s0 = {}, sigma = {sigma})",
                self.s0
            )));
        }
        Ok(v)
    }
}

impl ScoreModel for GaussianScore {
    fn shape(&self) -> Option<Shape> {
        Some(self.mu.shape())
    }

    fn score(&self, x: &Tensor, sigma: f64) -> Result<Tensor> {
        check_shape(self, x)?;
        let v = self.variance(sigma)?;
        x.zip_map(&self.mu, |a, m| -(a - m) / v)
    }

    fn log_density(&self, x: &Tensor, sigma: f64) -> Result<f64> {
        check_shape(self, x)?;
        let v = self.variance(sigma)?;
        let d = x.len() as f64;
        let r2 = x.sub(&self.mu)?.norm_sq();
        Ok(-r2 / (2.0 * v) - 0.5 * d * (2.0 * std::f64::consts::PI * v).ln())
    }

    fn sample_target(&self, src: &mut NoiseSource) -> Result<Tensor> {
        let z = src.draw_normal(self.mu.shape());
        z.scale(self.s0).add(&self.mu)
    }
}

/// Mixture weights below `exp(-40)` of the largest one are under double
/// precision relative to the total and are skipped.
const LOG_WEIGHT_FLOOR: f64 = -40.0;

/// `C = A B` for row-major `A: m x k` and `B` given by its strides.
fn gemm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], b_strides: (isize, isize), c: &mut [f64]) {
    debug_assert!(a.len() >= m * k && c.len() >= m * n);
    // SAFETY: the slices cover every index the strides reach, and `c` does
    // not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Empirical dataset smoothed by `N(0, sigma^2 I)`: a uniform Gaussian mixture
/// centred on the items.
#[derive(Debug, Clone)]
pub struct EmpiricalScore {
    shape: Shape,
    count: usize,
    /// Items back to back, `count * shape.len()` values.
    points: Vec<f64>,
    norms: Vec<f64>,
}

/// Above this fraction of active mixture weights a row is accumulated with a
/// dense product instead of a sparse sum.
const DENSE_WEIGHT_FRACTION: f64 = 0.25;

impl EmpiricalScore {
    pub fn new(ds: &ImageDataset) -> Self {
        let mut points = Vec::with_capacity(ds.len() * ds.shape().len());
        for item in ds.items() {
            points.extend_from_slice(item.data());
        }
        let norms = ds.items().iter().map(|t| t.norm_sq()).collect();
        EmpiricalScore {
            shape: ds.shape(),
            count: ds.len(),
            points,
            norms,
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    fn item(&self, i: usize) -> &[f64] {
        let d = self.shape.len();
        &self.points[i * d..(i + 1) * d]
    }

    /// `-||x - x_i||^2 / (2 sigma^2)` for every point and item, row-major
    /// `xs.len() x count`. Distances are expanded as
    /// `||x||^2 + ||x_i||^2 - 2 x . x_i` so the cross terms form one product.
    fn log_kernels(&self, xs: &[Tensor], sigma: f64) -> Result<Vec<f64>> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "empirical score needs sigma > 0 (got {sigma}); the unsmoothed density is atomic"
            )));
        }
        let d = self.shape.len();
        let mut flat = Vec::with_capacity(xs.len() * d);
        for x in xs {
            x.ensure_shape(self.shape)?;
            flat.extend_from_slice(x.data());
        }
        let n = self.count;
        let mut out = vec![0.0; xs.len() * n];
        gemm(xs.len(), d, n, &flat, &self.points, (1, d as isize), &mut out);
        let inv = 1.0 / (2.0 * sigma * sigma);
        for (x, row) in xs.iter().zip(out.chunks_exact_mut(n)) {
            let xn = x.norm_sq();
            for (v, pn) in row.iter_mut().zip(&self.norms) {
                *v = -(xn + pn - 2.0 * *v).max(0.0) * inv;
            }
        }
        Ok(out)
    }

    /// Normalised mixture weights of one row, zero below the floor.
    fn weights(&self, logk: &[f64]) -> (Vec<f64>, usize) {
        let max = logk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut active = 0;
        let mut w: Vec<f64> = logk
            .iter()
            .map(|&l| {
                let rel = l - max;
                if rel < LOG_WEIGHT_FLOOR {
                    0.0
                } else {
                    active += 1;
                    rel.exp()
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        (w, active)
    }
}

impl ScoreModel for EmpiricalScore {
    fn shape(&self) -> Option<Shape> {
        Some(self.shape)
    }

    fn score(&self, x: &Tensor, sigma: f64) -> Result<Tensor> {
        let mut out = self.score_batch(std::slice::from_ref(x), sigma)?;
        Ok(out.pop().expect("one score per point"))
    }

    fn score_batch(&self, xs: &[Tensor], sigma: f64) -> Result<Vec<Tensor>> {
        let n = self.count;
        let d = self.shape.len();
        let logk = self.log_kernels(xs, sigma)?;
        let rows: Vec<(Vec<f64>, usize)> = logk.chunks_exact(n).map(|l| self.weights(l)).collect();

        // posterior means: dense rows through one product, sparse rows summed
        let mut means = vec![vec![0.0; d]; xs.len()];
        let dense: Vec<usize> = (0..xs.len())
            .filter(|&i| rows[i].1 as f64 > DENSE_WEIGHT_FRACTION * n as f64)
            .collect();
        if !dense.is_empty() {
            let w: Vec<f64> = dense.iter().flat_map(|&i| rows[i].0.iter().copied()).collect();
            let mut m = vec![0.0; dense.len() * d];
            gemm(dense.len(), n, d, &w, &self.points, (d as isize, 1), &mut m);
            for (&i, row) in dense.iter().zip(m.chunks_exact(d)) {
                means[i].copy_from_slice(row);
            }
        }
        for (i, (w, active)) in rows.iter().enumerate() {
            if *active as f64 > DENSE_WEIGHT_FRACTION * n as f64 {
                continue;
            }
            for (j, &wj) in w.iter().enumerate() {
                if wj != 0.0 {
                    for (m, p) in means[i].iter_mut().zip(self.item(j)) {
                        *m += wj * p;
                    }
                }
            }
        }
        let inv_var = 1.0 / (sigma * sigma);
        xs.iter()
            .zip(means)
            .map(|(x, m)| {
                let data = m.iter().zip(x.data()).map(|(mv, xv)| (mv - xv) * inv_var).collect();
                Tensor::from_vec(self.shape, data)
            })
            .collect()
    }

    fn log_density(&self, x: &Tensor, sigma: f64) -> Result<f64> {
        let logk = self.log_kernels(std::slice::from_ref(x), sigma)?;
        let max = logk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logk.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        let d = self.shape.len() as f64;
        Ok(lse
            - (self.count as f64).ln()
            - 0.5 * d * (2.0 * std::f64::consts::PI * sigma * sigma).ln())
    }

    fn sample_target(&self, src: &mut NoiseSource) -> Result<Tensor> {
        let i = src.index(self.count);
        Tensor::from_vec(self.shape, self.item(i).to_vec())
    }
}

/// Gaussian whose covariance is diagonal in the orthonormal DCT basis:
/// `x = mean + idct2(sqrt(v) * z)`. Smoothing at level `sigma` adds `sigma^2`
/// to every coefficient variance.
#[derive(Debug, Clone)]
pub struct SpectralGaussianScore {
    mean: Tensor,
    mean_coeffs: Tensor,
    variances: Tensor,
}

impl SpectralGaussianScore {
    /// `variances` holds the DCT-coefficient variances, same shape as `mean`.
    pub fn new(mean: Tensor, variances: Tensor) -> Result<Self> {
        variances.ensure_shape(mean.shape())?;
        if variances.data().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("coefficient variances must be nonnegative".into()));
        }
        Ok(SpectralGaussianScore {
            mean_coeffs: dct2(&mean),
            mean,
            variances,
        })
    }

    pub fn mean(&self) -> &Tensor {
        &self.mean
    }

    /// DCT coefficients of the mean.
    pub fn mean_coeffs(&self) -> &Tensor {
        &self.mean_coeffs
    }

    pub fn variances(&self) -> &Tensor {
        &self.variances
    }

    fn smoothed(&self, sigma: f64) -> Result<Tensor> {
        let s2 = sigma * sigma;
        let v = self.variances.map(|v| v + s2);
        if v.data().iter().any(|&x| x <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "degenerate coefficient variance at sigma = {sigma}"
            )));
        }
        Ok(v)
    }
}

impl ScoreModel for SpectralGaussianScore {
    fn shape(&self) -> Option<Shape> {
        Some(self.mean.shape())
    }

    fn score(&self, x: &Tensor, sigma: f64) -> Result<Tensor> {
        x.ensure_shape(self.mean.shape())?;
        let v = self.smoothed(sigma)?;
        let c = dct2(&x.sub(&self.mean)?);
        let out = idct2(&c.zip_map(&v, |c, v| -c / v)?);
        out.ensure_finite()?;
        Ok(out)
    }

    fn log_density(&self, x: &Tensor, sigma: f64) -> Result<f64> {
        x.ensure_shape(self.mean.shape())?;
        let v = self.smoothed(sigma)?;
        let c = dct2(&x.sub(&self.mean)?);
        let two_pi = 2.0 * std::f64::consts::PI;
        Ok(c.data()
            .iter()
            .zip(v.data())
            .map(|(c, v)| -c * c / (2.0 * v) - 0.5 * (two_pi * v).ln())
            .sum())
    }

    fn sample_target(&self, src: &mut NoiseSource) -> Result<Tensor> {
        let z = src.draw_normal(self.mean.shape());
        let coeffs = z.zip_map(&self.variances, |z, v| z * v.sqrt())?;
        idct2(&coeffs).add(&self.mean)
    }
}

/// Flat density: zero score everywhere. Turns the sampler into a filtered
/// random walk.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroScore;

impl ScoreModel for ZeroScore {
    fn shape(&self) -> Option<Shape> {
        None
    }

    fn score(&self, x: &Tensor, _sigma: f64) -> Result<Tensor> {
        Ok(Tensor::zeros(x.shape()))
    }

    fn log_density(&self, _x: &Tensor, _sigma: f64) -> Result<f64> {
        Ok(0.0)
    }

    fn sample_target(&self, _src: &mut NoiseSource) -> Result<Tensor> {
        Err(Error::InvalidArgument("the flat density cannot be sampled".into()))
    }
}

/// Decreasing noise ladder `sigma_1 > ... > sigma_L`, each level run for
/// `steps_per_level` Langevin steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevels {
    sigmas: Vec<f64>,
    steps_per_level: usize,
}

impl NoiseLevels {
    pub fn new(sigmas: Vec<f64>, steps_per_level: usize) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::InvalidArgument("at least one noise level is required".into()));
        }
        if sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidArgument("noise levels must be positive and finite".into()));
        }
        if sigmas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument("noise levels must be strictly decreasing".into()));
        }
        if steps_per_level == 0 {
            return Err(Error::InvalidArgument("steps_per_level must be at least 1".into()));
        }
        Ok(NoiseLevels {
            sigmas,
            steps_per_level,
        })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn levels(&self) -> usize {
        self.sigmas.len()
    }

    pub fn steps_per_level(&self) -> usize {
        self.steps_per_level
    }

    pub fn total_steps(&self) -> usize {
        self.levels() * self.steps_per_level
    }

    pub fn sigma_min(&self) -> f64 {
        *self.sigmas.last().unwrap()
    }

    pub fn with_steps_per_level(&self, steps_per_level: usize) -> Result<Self> {
        NoiseLevels::new(self.sigmas.clone(), steps_per_level)
    }
}

/// `sigma_i = sigma_max * (sigma_min / sigma_max)^((i - 1) / (L - 1))`.
pub fn geometric_levels(sigma_max: f64, sigma_min: f64, levels: usize, steps_per_level: usize) -> Result<NoiseLevels> {
    if !(sigma_max > sigma_min && sigma_min > 0.0 && sigma_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need sigma_max > sigma_min > 0, got {sigma_max} and {sigma_min}"
        )));
    }
    if levels == 0 {
        return Err(Error::InvalidArgument("need at least one level".into()));
    }
    let sigmas = if levels == 1 {
        vec![sigma_max]
    } else {
        let ratio = sigma_min / sigma_max;
        (0..levels)
            .map(|i| sigma_max * ratio.powf(i as f64 / (levels - 1) as f64))
            .collect()
    };
    NoiseLevels::new(sigmas, steps_per_level)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(c: usize, h: usize, w: usize) -> Shape {
        Shape::new(c, h, w).unwrap()
    }

    #[test]
    fn gaussian_score_vanishes_at_mode() {
        let mu = NoiseSource::new(1).draw_normal(shape(1, 3, 3));
        let g = GaussianScore::new(mu.clone(), 0.7).unwrap();
        assert!(g.score(&mu, 0.3).unwrap().is_constant(0.0));
    }

    #[test]
    fn standard_normal_score_is_minus_x() {
        let s = shape(1, 1, 2);
        let g = GaussianScore::standard(s);
        let x = Tensor::from_vec(s, vec![2.0, 0.0]).unwrap();
        assert_eq!(g.score(&x, 0.0).unwrap().data(), &[-2.0, 0.0]);
    }

    #[test]
    fn single_item_mixture_matches_gaussian() {
        let s = shape(1, 2, 3);
        let mut src = NoiseSource::new(4);
        let item = src.draw_normal(s);
        let x = src.draw_normal(s);
        let emp = EmpiricalScore::new(&ImageDataset::new(vec![item.clone()]).unwrap());
        let gauss = GaussianScore::new(item, 0.0).unwrap();
        let a = emp.score(&x, 0.5).unwrap();
        let b = gauss.score(&x, 0.5).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-13);
        let la = emp.log_density(&x, 0.5).unwrap();
        let lb = gauss.log_density(&x, 0.5).unwrap();
        assert!((la - lb).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_has_zero_score_at_origin() {
        let s = shape(1, 2, 2);
        let a = Tensor::filled(s, 0.8);
        let ds = ImageDataset::new(vec![a.clone(), a.scale(-1.0)]).unwrap();
        let sc = EmpiricalScore::new(&ds).score(&Tensor::zeros(s), 0.3).unwrap();
        assert!(sc.data().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn empirical_rejects_zero_sigma() {
        let s = shape(1, 1, 1);
        let e = EmpiricalScore::new(&ImageDataset::new(vec![Tensor::ones(s)]).unwrap());
        assert!(e.score(&Tensor::zeros(s), 0.0).is_err());
    }

    #[test]
    fn far_away_items_do_not_underflow() {
        let s = shape(1, 1, 1);
        let ds = ImageDataset::new(vec![Tensor::filled(s, 0.0), Tensor::filled(s, 1000.0)]).unwrap();
        let e = EmpiricalScore::new(&ds);
        let sc = e.score(&Tensor::filled(s, 999.0), 0.01).unwrap();
        assert!((sc.data()[0] - 1.0 / 1e-4).abs() < 1e-6);
        assert!(e.log_density(&Tensor::filled(s, 500.0), 0.01).unwrap().is_finite());
    }

    #[test]
    fn geometric_ladder() {
        let l = geometric_levels(1.0, 0.01, 3, 5).unwrap();
        for (a, b) in l.sigmas().iter().zip([1.0, 0.1, 0.01]) {
            assert!((a - b).abs() <= 1e-15 * b.max(1.0));
        }
        assert_eq!(l.total_steps(), 15);
        assert_eq!(geometric_levels(2.0, 0.5, 1, 1).unwrap().sigmas(), &[2.0]);
        assert!(geometric_levels(0.1, 1.0, 3, 1).is_err());
        assert!(geometric_levels(1.0, 0.0, 3, 1).is_err());
        assert!(NoiseLevels::new(vec![1.0, 1.0], 1).is_err());
    }

    #[test]
    fn geometric_ratio_is_constant() {
        let l = geometric_levels(50.0, 0.01, 12, 1).unwrap();
        let r: Vec<f64> = l.sigmas().windows(2).map(|w| w[1] / w[0]).collect();
        assert!(r.iter().all(|x| (x - r[0]).abs() < 1e-12));
    }
}
