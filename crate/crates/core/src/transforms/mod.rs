//! Orthonormal DCT-II and the 2D DFT.
//!
//! Both are built on `rustfft`, which handles every length (mixed radix for
//! smooth sizes, Bluestein/Rader otherwise), so odd and prime grid sizes take
//! the same fast path as powers of two.

mod dct;
mod dft;
mod orthogonal;
mod plan;

use serde::{Deserialize, Serialize};

pub use dct::{dct1, dct2, dct_axis, idct1, idct2, Axis};
pub use dft::{dft2, idft2_real, SpectrumGrid};
pub use orthogonal::{Dct2Map, OrthogonalMap, PermutationMap};

use crate::tensor::Tensor;

/// `T^-1[mask * T[x]]` per channel (real part for the DFT). `mask` has the
/// shape of `x`.
pub fn filter_spectrum(x: &Tensor, mask: &Tensor, kind: TransformKind) -> crate::error::Result<Tensor> {
    mask.ensure_shape(x.shape())?;
    let mut data = x.data().to_vec();
    filter_in_place(&mut data, x.shape(), mask.data(), kind);
    Ok(Tensor::from_vec_unchecked(x.shape(), data))
}

pub(crate) fn filter_in_place(data: &mut [f64], shape: crate::tensor::Shape, mask: &[f64], kind: TransformKind) {
    match kind {
        TransformKind::Dct => dct::dct_filter_in_place(data, shape, mask),
        TransformKind::Dft => dft::dft_filter_in_place(data, shape, mask),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Dct,
    Dft,
}

impl TransformKind {
    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Dct => "dct",
            TransformKind::Dft => "dft",
        }
    }
}

impl std::str::FromStr for TransformKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dct" => Ok(TransformKind::Dct),
            "dft" => Ok(TransformKind::Dft),
            other => Err(format!("unknown transform '{other}' (expected dct or dft)")),
        }
    }
}

impl std::fmt::Display for TransformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-cell spectral power `|T[x]|^2`, laid out like `x`.
pub fn power_spectrum(x: &Tensor, kind: TransformKind) -> Tensor {
    match kind {
        TransformKind::Dct => dct2(x).map(|v| v * v),
        TransformKind::Dft => dft2(x).power(),
    }
}
