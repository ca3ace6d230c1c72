//! Naive reference implementations used as test oracles.

#![allow(dead_code)]

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use tdas_core::{Shape, Tensor};

fn dct_weight(k: usize, n: usize) -> f64 {
    if k == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    }
}

/// Orthonormal DCT-II by the defining sum.
pub fn naive_dct1(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| v * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos())
                .sum();
            dct_weight(k, n) * s
        })
        .collect()
}

/// Orthonormal 2D DCT-II as a full double sum per output cell.
pub fn naive_dct2(t: &Tensor) -> Tensor {
    let s = t.shape();
    let (_, h, w) = s.as_tuple();
    let cos_h: Vec<f64> = (0..h * h)
        .map(|i| (PI * (2 * (i % h) + 1) as f64 * (i / h) as f64 / (2 * h) as f64).cos())
        .collect();
    let cos_w: Vec<f64> = (0..w * w)
        .map(|i| (PI * (2 * (i % w) + 1) as f64 * (i / w) as f64 / (2 * w) as f64).cos())
        .collect();
    Tensor::from_fn(s, |ch, k, l| {
        let mut acc = 0.0;
        for y in 0..h {
            for x in 0..w {
                acc += t[(ch, y, x)] * cos_h[k * h + y] * cos_w[l * w + x];
            }
        }
        dct_weight(k, h) * dct_weight(l, w) * acc
    })
    .unwrap()
}

/// Unnormalised 2D DFT by the defining double sum.
pub fn naive_dft2(t: &Tensor) -> Vec<Complex64> {
    let (c, h, w) = t.shape().as_tuple();
    let mut out = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        for k in 0..h {
            for l in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let phase = -2.0 * PI * ((k * y % h) as f64 / h as f64 + (l * x % w) as f64 / w as f64);
                        acc += t[(ch, y, x)] * Complex64::from_polar(1.0, phase);
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

/// `min { q in S : #{s in S : s <= q} >= alpha |S| }`, checked element by element.
pub fn brute_quantile(values: &[f64], alpha: f64) -> f64 {
    let n = values.len() as f64;
    values
        .iter()
        .copied()
        .filter(|&q| values.iter().filter(|&&s| s <= q).count() as f64 >= alpha * n)
        .fold(f64::INFINITY, f64::min)
}

pub fn random_tensor(shape: Shape, seed: u64) -> Tensor {
    tdas_core::NoiseSource::new(seed).draw_normal(shape)
}
