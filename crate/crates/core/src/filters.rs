//! Space and frequency masks and the filtered-noise operator
//! `eta = T^-1[M_freq * T[M_space * z]]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ImageDataset, Shape, Tensor};
use crate::transforms::{filter_in_place, TransformKind};

/// Squared distance of frequency cell `(h, w)` from DC, with each axis
/// normalised by the grid extent. For the DFT the nearest of the four
/// corners is used, since its spectrum wraps around.
pub fn normalized_distance(h: usize, w: usize, height: usize, width: usize, kind: TransformKind) -> f64 {
    let (hf, wf) = (h as f64, w as f64);
    let (hh, ww) = (height as f64, width as f64);
    match kind {
        TransformKind::Dct => (hf / hh).powi(2) + (wf / ww).powi(2),
        TransformKind::Dft => {
            let dh = hf.min(hh - hf) / hh;
            let dw = wf.min(ww - wf) / ww;
            dh * dh + dw * dw
        }
    }
}

/// Radial piecewise-constant frequency mask parameters. Radii are fractions
/// of the grid extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqFilterParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub r1: f64,
    pub r2: f64,
    pub transform: TransformKind,
    /// 2: pass zone plus one attenuated zone (`r1`, `lambda2`); 3: full form.
    pub zones: u8,
}

impl FreqFilterParams {
    pub fn three_zone(lambda1: f64, lambda2: f64, r1: f64, r2: f64, transform: TransformKind) -> Result<Self> {
        let p = FreqFilterParams {
            lambda1,
            lambda2,
            r1,
            r2,
            transform,
            zones: 3,
        };
        p.validate()?;
        Ok(p)
    }

    /// Single threshold `r_th` with one suppression rate `lambda`.
    pub fn two_zone(lambda: f64, r_th: f64, transform: TransformKind) -> Result<Self> {
        let p = FreqFilterParams {
            lambda1: lambda,
            lambda2: lambda,
            r1: r_th,
            r2: r_th,
            transform,
            zones: 2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn identity(transform: TransformKind) -> Self {
        FreqFilterParams {
            lambda1: 1.0,
            lambda2: 1.0,
            r1: std::f64::consts::SQRT_2,
            r2: std::f64::consts::SQRT_2,
            transform,
            zones: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_lambda = |l: f64| l.is_finite() && l > 0.0;
        if !ok_lambda(self.lambda1) || !ok_lambda(self.lambda2) {
            return Err(Error::InvalidArgument(format!(
                "lambdas must be positive, got {} and {}",
                self.lambda1, self.lambda2
            )));
        }
        if !(self.r1.is_finite() && self.r2.is_finite() && self.r1 > 0.0 && self.r1 <= self.r2) {
            return Err(Error::InvalidArgument(format!(
                "radii must satisfy 0 < r1 <= r2, got {} and {}",
                self.r1, self.r2
            )));
        }
        if self.zones != 2 && self.zones != 3 {
            return Err(Error::InvalidArgument(format!("zones must be 2 or 3, got {}", self.zones)));
        }
        Ok(())
    }

    /// Mask value at normalised squared distance `d0`.
    pub fn value_at(&self, d0: f64) -> f64 {
        let r2 = if self.zones == 2 { self.r1 } else { self.r2 };
        if d0 <= 2.0 * self.r1 * self.r1 {
            1.0
        } else if d0 <= 2.0 * r2 * r2 {
            self.lambda1
        } else {
            self.lambda2
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: FreqFilterParams = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Channel-uniform frequency mask for `shape`.
pub fn build_freq_mask(p: &FreqFilterParams, shape: Shape) -> Result<Tensor> {
    p.validate()?;
    let mut plane = Vec::with_capacity(shape.plane());
    for h in 0..shape.height {
        for w in 0..shape.width {
            plane.push(p.value_at(normalized_distance(h, w, shape.height, shape.width, p.transform)));
        }
    }
    let data = plane.iter().copied().cycle().take(shape.len()).collect();
    Tensor::from_vec(shape, data)
}

/// Per-pixel space mask with entries in `[1/3, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceFilter {
    mask: Tensor,
}

impl SpaceFilter {
    pub fn identity(shape: Shape) -> Self {
        SpaceFilter {
            mask: Tensor::ones(shape),
        }
    }

    /// Wraps a stored mask, checking the normalised range.
    pub fn from_mask(mask: Tensor) -> Result<Self> {
        const SLACK: f64 = 1e-12;
        if mask.min() < 1.0 / 3.0 - SLACK || mask.max() > 1.0 + SLACK {
            return Err(Error::InvalidArgument(format!(
                "space mask entries must lie in [1/3, 1], found [{}, {}]",
                mask.min(),
                mask.max()
            )));
        }
        Ok(SpaceFilter { mask })
    }

    pub fn mask(&self) -> &Tensor {
        &self.mask
    }

    pub fn shape(&self) -> Shape {
        self.mask.shape()
    }

    pub fn is_identity(&self) -> bool {
        self.mask.is_constant(1.0)
    }
}

/// `raw = ln(1 + mean_i |x_i|)` per pixel, normalised to
/// `(2 * raw / max(raw) + 1) / 3`.
pub fn build_space_mask(ds: &ImageDataset) -> Result<SpaceFilter> {
    let shape = ds.shape();
    let n = ds.len() as f64;
    let mut acc = vec![0.0; shape.len()];
    for item in ds.items() {
        for (a, v) in acc.iter_mut().zip(item.data()) {
            *a += v.abs();
        }
    }
    let raw: Vec<f64> = acc.iter().map(|a| (a / n).ln_1p()).collect();
    let max = raw.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::DegenerateDataset(
            "every pixel is zero; the space mask is undefined".into(),
        ));
    }
    let mask = raw.iter().map(|r| (2.0 * r / max + 1.0) / 3.0).collect();
    Ok(SpaceFilter {
        mask: Tensor::from_vec(shape, mask)?,
    })
}

/// Precomputed filter pair. Stages whose mask is all ones are skipped, so the
/// all-ones configuration returns its input unchanged bit for bit.
#[derive(Debug, Clone)]
pub struct TdasFilter {
    space: SpaceFilter,
    freq: Tensor,
    transform: TransformKind,
    space_identity: bool,
    freq_identity: bool,
}

impl TdasFilter {
    pub fn new(space: SpaceFilter, freq: Tensor, transform: TransformKind) -> Result<Self> {
        freq.ensure_shape(space.shape())?;
        freq.ensure_finite()?;
        Ok(TdasFilter {
            space_identity: space.is_identity(),
            freq_identity: freq.is_constant(1.0),
            space,
            freq,
            transform,
        })
    }

    pub fn identity(shape: Shape, transform: TransformKind) -> Self {
        TdasFilter {
            space: SpaceFilter::identity(shape),
            freq: Tensor::ones(shape),
            transform,
            space_identity: true,
            freq_identity: true,
        }
    }

    pub fn from_params(space: SpaceFilter, params: &FreqFilterParams) -> Result<Self> {
        let freq = build_freq_mask(params, space.shape())?;
        Self::new(space, freq, params.transform)
    }

    pub fn shape(&self) -> Shape {
        self.space.shape()
    }

    pub fn space(&self) -> &SpaceFilter {
        &self.space
    }

    pub fn freq(&self) -> &Tensor {
        &self.freq
    }

    pub fn transform(&self) -> TransformKind {
        self.transform
    }

    pub fn is_identity(&self) -> bool {
        self.space_identity && self.freq_identity
    }

    pub fn apply(&self, z: &Tensor) -> Result<Tensor> {
        z.ensure_shape(self.shape())?;
        let space = (!self.space_identity).then(|| self.space.mask());
        let freq = (!self.freq_identity).then_some(&self.freq);
        Ok(filter_stages(z, space, freq, self.transform))
    }
}

/// Space mask, then `T^-1[freq * T[.]]`; `None` skips a stage.
fn filter_stages(z: &Tensor, space: Option<&Tensor>, freq: Option<&Tensor>, transform: TransformKind) -> Tensor {
    let mut data = z.data().to_vec();
    if let Some(m) = space {
        data.iter_mut().zip(m.data()).for_each(|(v, m)| *v *= m);
    }
    if let Some(f) = freq {
        filter_in_place(&mut data, z.shape(), f.data(), transform);
    }
    Tensor::from_vec_unchecked(z.shape(), data)
}

/// One-shot form of [`TdasFilter::apply`], without copying the masks.
pub fn apply_tdas(z: &Tensor, space: &SpaceFilter, freq: &Tensor, transform: TransformKind) -> Result<Tensor> {
    z.ensure_shape(space.shape())?;
    freq.ensure_shape(space.shape())?;
    freq.ensure_finite()?;
    let space = (!space.is_identity()).then(|| space.mask());
    let freq = (!freq.is_constant(1.0)).then_some(freq);
    Ok(filter_stages(z, space, freq, transform))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseSource;

    fn shape(c: usize, h: usize, w: usize) -> Shape {
        Shape::new(c, h, w).unwrap()
    }

    #[test]
    fn fused_filter_matches_separate_transforms() {
        use crate::transforms::{dct2, dft2, idct2, idft2_real};
        for (c, h, w) in [(1, 1, 1), (2, 7, 10), (3, 16, 9), (1, 32, 32), (2, 5, 37)] {
            let s = shape(c, h, w);
            let z = NoiseSource::new(h as u64).draw_normal(s);
            let mask = NoiseSource::new(w as u64).draw_normal(s).map(|v| 0.5 + 0.2 * v.tanh());
            let space = SpaceFilter::from_mask(Tensor::filled(s, 0.7)).unwrap();
            let spaced = z.mul(space.mask()).unwrap();

            let dct = apply_tdas(&z, &space, &mask, TransformKind::Dct).unwrap();
            assert_eq!(dct, idct2(&dct2(&spaced).mul(&mask).unwrap()));

            let dft = apply_tdas(&z, &space, &mask, TransformKind::Dft).unwrap();
            let separate = idft2_real(&dft2(&spaced).masked(&mask));
            assert!(dft.max_abs_diff(&separate).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn full_radius_or_unit_lambdas_give_ones() {
        let s = shape(2, 9, 12);
        for kind in [TransformKind::Dct, TransformKind::Dft] {
            let p = FreqFilterParams::three_zone(0.3, 0.2, 2f64.sqrt(), 2f64.sqrt(), kind).unwrap();
            assert!(build_freq_mask(&p, s).unwrap().is_constant(1.0));
            let p = FreqFilterParams::three_zone(1.0, 1.0, 0.1, 0.2, kind).unwrap();
            assert!(build_freq_mask(&p, s).unwrap().is_constant(1.0));
        }
    }

    #[test]
    fn bedroom_dct_row_zones() {
        // lambda1, lambda2, r1, r2 from the LSUN-bedroom DCT calibration.
        let p = FreqFilterParams::three_zone(0.638, 0.540, 0.770, 0.901, TransformKind::Dct).unwrap();
        let m = build_freq_mask(&p, shape(3, 256, 256)).unwrap();
        assert_eq!(m[(0, 0, 0)], 1.0);
        let d0 = normalized_distance(255, 255, 256, 256, TransformKind::Dct);
        assert!((d0 - 1.984).abs() < 1e-3 && d0 > 2.0 * 0.901f64.powi(2));
        assert_eq!(m[(2, 255, 255)], 0.540);
        let d = normalized_distance(200, 200, 256, 256, TransformKind::Dct);
        assert!(d > 2.0 * 0.77f64.powi(2) && d <= 2.0 * 0.901f64.powi(2));
        assert_eq!(m[(1, 200, 200)], 0.638);
    }

    #[test]
    fn dft_distance_wraps_to_nearest_corner() {
        assert_eq!(normalized_distance(0, 0, 8, 8, TransformKind::Dft), 0.0);
        assert_eq!(
            normalized_distance(7, 1, 8, 8, TransformKind::Dft),
            normalized_distance(1, 1, 8, 8, TransformKind::Dft)
        );
        assert_eq!(normalized_distance(4, 4, 8, 8, TransformKind::Dft), 0.5);
    }

    #[test]
    fn two_zone_uses_single_threshold() {
        let p = FreqFilterParams::two_zone(0.5, 0.25, TransformKind::Dct).unwrap();
        assert_eq!(p.value_at(0.1), 1.0);
        assert_eq!(p.value_at(0.2), 0.5);
        assert_eq!(p.value_at(1.5), 0.5);
    }

    #[test]
    fn params_validation_and_json() {
        assert!(FreqFilterParams::three_zone(0.5, 0.4, 0.5, 0.4, TransformKind::Dct).is_err());
        assert!(FreqFilterParams::three_zone(0.0, 0.4, 0.1, 0.4, TransformKind::Dct).is_err());
        assert!(FreqFilterParams::three_zone(0.5, 0.4, 0.0, 0.4, TransformKind::Dct).is_err());
        let p = FreqFilterParams::three_zone(0.9, 0.8, 0.4, 0.455, TransformKind::Dft).unwrap();
        let json = p.to_json().unwrap();
        for key in ["lambda1", "lambda2", "r1", "r2", "transform", "zones", "\"dft\""] {
            assert!(json.contains(key), "{json}");
        }
        assert_eq!(FreqFilterParams::from_json(&json).unwrap(), p);
    }

    #[test]
    fn space_mask_constant_dataset_is_identity() {
        let s = shape(1, 3, 3);
        let ds = ImageDataset::new(vec![Tensor::ones(s), Tensor::ones(s)]).unwrap();
        let m = build_space_mask(&ds).unwrap();
        assert!(m.mask().max_abs_diff(&Tensor::ones(s)).unwrap() < 1e-15);
        assert_eq!(m.mask(), SpaceFilter::identity(s).mask());
    }

    #[test]
    fn space_mask_single_bright_pixel() {
        let s = shape(1, 2, 2);
        let mut x = Tensor::zeros(s);
        x[(0, 1, 0)] = std::f64::consts::E - 1.0;
        let m = build_space_mask(&ImageDataset::new(vec![x]).unwrap()).unwrap();
        assert!((m.mask()[(0, 1, 0)] - 1.0).abs() < 1e-15);
        for (h, w) in [(0, 0), (0, 1), (1, 1)] {
            assert!((m.mask()[(0, h, w)] - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn space_mask_rejects_all_zero() {
        let ds = ImageDataset::new(vec![Tensor::zeros(shape(1, 2, 2))]).unwrap();
        assert!(matches!(build_space_mask(&ds), Err(Error::DegenerateDataset(_))));
    }

    #[test]
    fn identity_masks_return_input() {
        let s = shape(3, 8, 5);
        let z = NoiseSource::new(1).draw_normal(s);
        for kind in [TransformKind::Dct, TransformKind::Dft] {
            let eta = apply_tdas(&z, &SpaceFilter::identity(s), &Tensor::ones(s), kind).unwrap();
            assert_eq!(eta, z);
        }
    }

    #[test]
    fn scalar_mask_scales() {
        let s = shape(2, 6, 7);
        let z = NoiseSource::new(2).draw_normal(s);
        for kind in [TransformKind::Dct, TransformKind::Dft] {
            let eta = apply_tdas(&z, &SpaceFilter::identity(s), &Tensor::filled(s, 0.5), kind).unwrap();
            assert!(eta.max_abs_diff(&z.scale(0.5)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let z = Tensor::zeros(shape(1, 4, 4));
        let s = shape(1, 4, 5);
        assert!(matches!(
            apply_tdas(&z, &SpaceFilter::identity(s), &Tensor::ones(s), TransformKind::Dct),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn stored_space_mask_range_is_checked() {
        let s = shape(1, 2, 2);
        assert!(SpaceFilter::from_mask(Tensor::filled(s, 0.2)).is_err());
        assert!(SpaceFilter::from_mask(Tensor::filled(s, 0.5)).is_ok());
    }
}
