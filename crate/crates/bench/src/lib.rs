//! Shared inputs for the criterion benchmarks.

use tdas_core::{FreqFilterParams, NoiseSource, Shape, SpaceFilter, TdasFilter, Tensor, TransformKind};

pub const SIZES: [usize; 4] = [32, 64, 128, 256];

/// A non-trivial three-zone filter on a `channels x size x size` grid.
pub fn bench_filter(channels: usize, size: usize, transform: TransformKind) -> TdasFilter {
    let shape = Shape::new(channels, size, size).expect("valid shape");
    let params = FreqFilterParams::three_zone(0.9, 1.2, 0.2, 0.5, transform).expect("valid params");
    let space = SpaceFilter::from_mask(Tensor::from_fn(shape, |_, h, _| 1.0 / 3.0 + (h % 2) as f64 / 3.0).expect("finite"))
        .expect("mask in range");
    TdasFilter::from_params(space, &params).expect("matching shapes")
}

pub fn bench_input(channels: usize, size: usize) -> Tensor {
    NoiseSource::new(7).draw_normal(Shape::new(channels, size, size).expect("valid shape"))
}
