use crate::noise::NoiseSource;
use crate::tensor::{Shape, Tensor};

use super::{dct2, idct2};

/// A real orthogonal linear map on tensors of one shape, `F^-1 = F^T`.
pub trait OrthogonalMap: Send + Sync {
    fn forward(&self, x: &Tensor) -> Tensor;
    fn inverse(&self, y: &Tensor) -> Tensor;
}

/// The separable orthonormal DCT-II.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dct2Map;

impl OrthogonalMap for Dct2Map {
    fn forward(&self, x: &Tensor) -> Tensor {
        dct2(x)
    }

    fn inverse(&self, y: &Tensor) -> Tensor {
        idct2(y)
    }
}

/// Coordinate permutation: `forward(x)[i] = x[perm[i]]`.
#[derive(Debug, Clone)]
pub struct PermutationMap {
    shape: Shape,
    perm: Vec<usize>,
    inv: Vec<usize>,
}

impl PermutationMap {
    /// Uniformly random permutation (Fisher-Yates).
    pub fn random(shape: Shape, src: &mut NoiseSource) -> Self {
        let n = shape.len();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = src.index(i + 1);
            perm.swap(i, j);
        }
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        PermutationMap { shape, perm, inv }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    fn gather(&self, x: &Tensor, idx: &[usize]) -> Tensor {
        let d = x.data();
        Tensor::from_vec_unchecked(x.shape(), idx.iter().map(|&i| d[i]).collect())
    }
}

impl OrthogonalMap for PermutationMap {
    fn forward(&self, x: &Tensor) -> Tensor {
        assert_eq!(x.shape(), self.shape);
        self.gather(x, &self.perm)
    }

    fn inverse(&self, y: &Tensor) -> Tensor {
        assert_eq!(y.shape(), self.shape);
        self.gather(y, &self.inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_inverts_and_preserves_norm() {
        let s = Shape::new(2, 3, 4).unwrap();
        let mut src = NoiseSource::new(8);
        let p = PermutationMap::random(s, &mut src);
        let x = src.draw_normal(s);
        let y = p.forward(&x);
        assert_eq!(p.inverse(&y), x);
        assert_eq!(y.norm_sq().to_bits(), {
            let mut v: Vec<f64> = y.data().to_vec();
            v.sort_by(f64::total_cmp);
            let mut w: Vec<f64> = x.data().to_vec();
            w.sort_by(f64::total_cmp);
            assert_eq!(v, w);
            y.norm_sq().to_bits()
        });
    }
}
