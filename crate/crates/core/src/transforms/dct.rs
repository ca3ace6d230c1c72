use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::Fft;

use super::plan::{fft_plan, transpose};
use crate::tensor::{Shape, Tensor};

/// Orthonormal DCT-II of length `n` computed with one complex FFT of length
/// `n` (Makhoul's even/odd reordering). The inverse is the matching DCT-III.
struct DctPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `exp(-i*pi*k/(2n))`
    twiddle: Vec<Complex64>,
}

impl DctPlan {
    fn new(n: usize) -> Self {
        let twiddle = (0..n)
            .map(|k| Complex64::from_polar(1.0, -PI * k as f64 / (2.0 * n as f64)))
            .collect();
        DctPlan {
            n,
            forward: fft_plan(n, false),
            inverse: fft_plan(n, true),
            twiddle,
        }
    }

    fn get(n: usize) -> Arc<DctPlan> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<DctPlan>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(n).or_insert_with(|| Arc::new(DctPlan::new(n))).clone()
    }

    fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }

    /// In-place forward transform of every length-`n` row in `data`.
    fn forward_rows(&self, data: &mut [f64], buf: &mut [Complex64], scratch: &mut [Complex64]) {
        let n = self.n;
        if n == 1 {
            return;
        }
        let w0 = (1.0 / n as f64).sqrt();
        let wk = (2.0 / n as f64).sqrt();
        for row in data.chunks_exact_mut(n) {
            let half = n.div_ceil(2);
            for i in 0..half {
                buf[i] = Complex64::new(row[2 * i], 0.0);
            }
            for i in 0..n / 2 {
                buf[n - 1 - i] = Complex64::new(row[2 * i + 1], 0.0);
            }
            self.forward.process_with_scratch(buf, scratch);
            row[0] = buf[0].re * w0;
            for k in 1..n {
                row[k] = (self.twiddle[k] * buf[k]).re * wk;
            }
        }
    }

    fn inverse_rows(&self, data: &mut [f64], buf: &mut [Complex64], scratch: &mut [Complex64]) {
        let n = self.n;
        if n == 1 {
            return;
        }
        let nf = n as f64;
        // orthonormal coefficients -> unnormalised DCT-II values C(k)
        let c0 = nf.sqrt();
        let ck = (nf / 2.0).sqrt();
        for row in data.chunks_exact_mut(n) {
            buf[0] = Complex64::new(row[0] * c0, 0.0);
            for k in 1..n {
                let z = Complex64::new(row[k] * ck, -row[n - k] * ck);
                buf[k] = self.twiddle[k].conj() * z;
            }
            self.inverse.process_with_scratch(buf, scratch);
            let half = n.div_ceil(2);
            for i in 0..half {
                row[2 * i] = buf[i].re / nf;
            }
            for i in 0..n / 2 {
                row[2 * i + 1] = buf[n - 1 - i].re / nf;
            }
        }
    }
}

fn run_rows(data: &mut [f64], n: usize, inverse: bool) {
    let plan = DctPlan::get(n);
    let mut buf = vec![Complex64::default(); n];
    let mut scratch = vec![Complex64::default(); plan.scratch_len()];
    if inverse {
        plan.inverse_rows(data, &mut buf, &mut scratch);
    } else {
        plan.forward_rows(data, &mut buf, &mut scratch);
    }
}

/// Orthonormal DCT-II:
/// `out[k] = w(k) * sum_n v[n] * cos(pi * (n + 1/2) * k / d)` with
/// `w(0) = sqrt(1/d)` and `w(k) = sqrt(2/d)` otherwise.
pub fn dct1(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    if !out.is_empty() {
        run_rows(&mut out, v.len(), false);
    }
    out
}

/// Inverse of [`dct1`] (the transpose of its matrix, DCT-III).
pub fn idct1(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    if !out.is_empty() {
        run_rows(&mut out, v.len(), true);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Transform each row (along `w`).
    Rows,
    /// Transform each column (along `h`).
    Cols,
}

/// 1D DCT (or inverse) along one spatial axis of every channel.
pub fn dct_axis(t: &Tensor, axis: Axis, inverse: bool) -> Tensor {
    let s = t.shape();
    let mut data = t.data().to_vec();
    match axis {
        Axis::Rows => run_rows(&mut data, s.width, inverse),
        Axis::Cols => {
            let plane = s.plane();
            let mut tmp = vec![0.0; plane];
            for ch in data.chunks_exact_mut(plane) {
                transpose(ch, s.height, s.width, &mut tmp);
                run_rows(&mut tmp, s.height, inverse);
                transpose(&tmp, s.width, s.height, ch);
            }
        }
    }
    Tensor::from_vec_unchecked(s, data)
}

/// Separable 2D orthonormal DCT-II per channel: rows, then columns.
pub fn dct2(t: &Tensor) -> Tensor {
    dct_axis(&dct_axis(t, Axis::Rows, false), Axis::Cols, false)
}

pub fn idct2(t: &Tensor) -> Tensor {
    dct_axis(&dct_axis(t, Axis::Cols, true), Axis::Rows, true)
}

/// `idct2(dct2(x) * mask)` per channel, in place, with the same arithmetic as
/// the three separate calls. Columns are handled in narrow blocks gathered
/// into a small buffer, so the plane is streamed three times and nothing
/// plane-sized is allocated.
pub(crate) fn dct_filter_in_place(data: &mut [f64], shape: Shape, mask: &[f64]) {
    let (h, w) = (shape.height, shape.width);
    let plane = shape.plane();
    let (rows, cols) = (DctPlan::get(w), DctPlan::get(h));
    let mut buf = vec![Complex64::default(); h.max(w)];
    let mut scratch = vec![Complex64::default(); rows.scratch_len().max(cols.scratch_len())];
    let mut blk = vec![0.0; COL_BLOCK * h];
    let mut mblk = vec![0.0; COL_BLOCK * h];
    for (x, m) in data.chunks_exact_mut(plane).zip(mask.chunks_exact(plane)) {
        rows.forward_rows(x, &mut buf[..w], &mut scratch);
        for c0 in (0..w).step_by(COL_BLOCK) {
            let nb = COL_BLOCK.min(w - c0);
            gather_cols(x, w, c0, nb, &mut blk);
            gather_cols(m, w, c0, nb, &mut mblk);
            let (blk, mblk) = (&mut blk[..nb * h], &mblk[..nb * h]);
            cols.forward_rows(blk, &mut buf[..h], &mut scratch);
            blk.iter_mut().zip(mblk).for_each(|(v, f)| *v *= f);
            cols.inverse_rows(blk, &mut buf[..h], &mut scratch);
            scatter_cols(blk, w, c0, nb, x);
        }
        rows.inverse_rows(x, &mut buf[..w], &mut scratch);
    }
}

/// Columns per block in the fused filters (two cache lines of `f64`).
pub(crate) const COL_BLOCK: usize = 16;

/// `out[j * h + r] = src[r * w + c0 + j]` for `j < nb`.
pub(crate) fn gather_cols<T: Copy>(src: &[T], w: usize, c0: usize, nb: usize, out: &mut [T]) {
    let h = src.len() / w;
    for (r, row) in src.chunks_exact(w).enumerate() {
        for (j, &v) in row[c0..c0 + nb].iter().enumerate() {
            out[j * h + r] = v;
        }
    }
}

pub(crate) fn scatter_cols<T: Copy>(blk: &[T], w: usize, c0: usize, nb: usize, dst: &mut [T]) {
    let h = dst.len() / w;
    for (r, row) in dst.chunks_exact_mut(w).enumerate() {
        for (j, v) in row[c0..c0 + nb].iter_mut().enumerate() {
            *v = blk[j * h + r];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn constant_vector_maps_to_dc() {
        assert!(close(&dct1(&[1.0; 4]), &[2.0, 0.0, 0.0, 0.0], 1e-14));
        assert!(close(&dct1(&[0.0; 4]), &[0.0; 4], 0.0));
        assert!(close(&idct1(&[2.0, 0.0, 0.0, 0.0]), &[1.0; 4], 1e-14));
    }

    #[test]
    fn length_one_is_identity() {
        assert_eq!(dct1(&[3.5]), vec![3.5]);
        assert_eq!(idct1(&[-2.0]), vec![-2.0]);
        assert!(dct1(&[]).is_empty());
    }

    #[test]
    fn constant_plane_has_single_dc_entry() {
        let t = Tensor::ones(Shape::new(1, 4, 4).unwrap());
        let d = dct2(&t);
        assert!((d[(0, 0, 0)] - 4.0).abs() < 1e-13);
        let rest: f64 = d.data()[1..].iter().map(|v| v.abs()).sum();
        assert!(rest < 1e-13);
    }
}
