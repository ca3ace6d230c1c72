use rustfft::num_complex::Complex64;

use super::dct::{gather_cols, scatter_cols, COL_BLOCK};
use super::plan::{fft_plan, transpose};
use crate::tensor::{Shape, Tensor};

/// Per-channel 2D spectrum of a real tensor (unnormalised forward DFT).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    shape: Shape,
    data: Vec<Complex64>,
}

impl SpectrumGrid {
    pub fn new(shape: Shape, data: Vec<Complex64>) -> Self {
        assert_eq!(shape.len(), data.len());
        SpectrumGrid { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, c: usize, h: usize, w: usize) -> Complex64 {
        self.data[(c * self.shape.height + h) * self.shape.width + w]
    }

    /// `|X|^2` per cell.
    pub fn power(&self) -> Tensor {
        Tensor::from_vec_unchecked(self.shape, self.data.iter().map(|z| z.norm_sqr()).collect())
    }

    /// Elementwise product with a real mask of the same shape.
    pub fn masked(&self, mask: &Tensor) -> SpectrumGrid {
        debug_assert_eq!(mask.shape(), self.shape);
        SpectrumGrid {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(mask.data())
                .map(|(z, m)| z * m)
                .collect(),
        }
    }

    /// Largest deviation from `X(h, w) = conj(X(-h mod H, -w mod W))`.
    pub fn conjugate_symmetry_error(&self) -> f64 {
        let Shape {
            channels,
            height,
            width,
        } = self.shape;
        let mut worst = 0.0f64;
        for c in 0..channels {
            for h in 0..height {
                for w in 0..width {
                    let mirror = self.get(c, (height - h) % height, (width - w) % width);
                    worst = worst.max((self.get(c, h, w) - mirror.conj()).norm());
                }
            }
        }
        worst
    }
}

fn fft_2d(data: &mut [Complex64], shape: Shape, inverse: bool) {
    let (h, w) = (shape.height, shape.width);
    let row_plan = fft_plan(w, inverse);
    let col_plan = fft_plan(h, inverse);
    let mut scratch = vec![
        Complex64::default();
        row_plan
            .get_inplace_scratch_len()
            .max(col_plan.get_inplace_scratch_len())
    ];
    let mut tmp = vec![Complex64::default(); shape.plane()];
    for plane in data.chunks_exact_mut(shape.plane()) {
        for row in plane.chunks_exact_mut(w) {
            row_plan.process_with_scratch(row, &mut scratch);
        }
        transpose(plane, h, w, &mut tmp);
        for col in tmp.chunks_exact_mut(h) {
            col_plan.process_with_scratch(col, &mut scratch);
        }
        transpose(&tmp, w, h, plane);
    }
}

/// `X(k, l) = sum_{h,w} x(h, w) * exp(-2*pi*i*(k*h/H + l*w/W))` per channel.
pub fn dft2(t: &Tensor) -> SpectrumGrid {
    let shape = t.shape();
    let mut data: Vec<Complex64> = t.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_2d(&mut data, shape, false);
    SpectrumGrid { shape, data }
}

/// Real part of the normalised inverse DFT.
pub fn idft2_real(s: &SpectrumGrid) -> Tensor {
    let shape = s.shape;
    let mut data = s.data.clone();
    fft_2d(&mut data, shape, true);
    let norm = shape.plane() as f64;
    Tensor::from_vec_unchecked(shape, data.iter().map(|z| z.re / norm).collect())
}

/// Real part of `idft2(dft2(x) * mask)` per channel, in place, tiled like
/// the DCT filter.
pub(crate) fn dft_filter_in_place(data: &mut [f64], shape: Shape, mask: &[f64]) {
    let (h, w) = (shape.height, shape.width);
    let plane = shape.plane();
    let (row_fwd, row_inv) = (fft_plan(w, false), fft_plan(w, true));
    let (col_fwd, col_inv) = (fft_plan(h, false), fft_plan(h, true));
    let scratch_len = [&row_fwd, &row_inv, &col_fwd, &col_inv]
        .iter()
        .map(|p| p.get_inplace_scratch_len())
        .max()
        .unwrap_or(0);
    let mut scratch = vec![Complex64::default(); scratch_len];
    let mut z = vec![Complex64::default(); plane];
    let mut blk = vec![Complex64::default(); COL_BLOCK * h];
    let mut mblk = vec![0.0; COL_BLOCK * h];
    let norm = plane as f64;
    for (x, m) in data.chunks_exact_mut(plane).zip(mask.chunks_exact(plane)) {
        z.iter_mut().zip(x.iter()).for_each(|(z, &v)| *z = Complex64::new(v, 0.0));
        row_fwd.process_with_scratch(&mut z, &mut scratch);
        for c0 in (0..w).step_by(COL_BLOCK) {
            let nb = COL_BLOCK.min(w - c0);
            gather_cols(&z, w, c0, nb, &mut blk);
            gather_cols(m, w, c0, nb, &mut mblk);
            let (blk, mblk) = (&mut blk[..nb * h], &mblk[..nb * h]);
            col_fwd.process_with_scratch(blk, &mut scratch);
            blk.iter_mut().zip(mblk).for_each(|(v, f)| *v *= f);
            col_inv.process_with_scratch(blk, &mut scratch);
            scatter_cols(blk, w, c0, nb, &mut z);
        }
        row_inv.process_with_scratch(&mut z, &mut scratch);
        x.iter_mut().zip(&z).for_each(|(v, z)| *v = z.re / norm);
    }
}
