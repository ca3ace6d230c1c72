mod common;

use common::brute_quantile;
use proptest::prelude::*;
use tdas_core::calib::{kappa, kappa_curve, quantile, RatioGrid};
use tdas_core::filters::normalized_distance;
use tdas_core::{calibrate, freq_power_stats, ratio_grid, CalibDirection, ImageDataset, NoiseSource, Shape, Tensor, TransformKind};

fn grid(n: usize, kind: TransformKind, f: impl Fn(f64) -> f64) -> RatioGrid {
    let t = Tensor::from_fn(Shape::new(1, n, n).unwrap(), |_, h, w| f(normalized_distance(h, w, n, n, kind))).unwrap();
    RatioGrid::from_tensor(t, kind).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn quantile_matches_the_set_definition(
        values in prop::collection::vec(prop_oneof![(-5i32..5).prop_map(f64::from), -10.0f64..10.0], 1..=200),
        alpha in prop_oneof![Just(1.0), Just(0.5), 1e-9f64..=1.0],
    ) {
        prop_assert_eq!(quantile(&values, alpha).unwrap(), brute_quantile(&values, alpha));
    }
}

#[test]
fn quantile_of_uniform_draws() {
    let mut src = NoiseSource::new(31);
    let v: Vec<f64> = (0..10_000).map(|_| src.uniform()).collect();
    assert!((quantile(&v, 0.75).unwrap() - 0.75).abs() <= 0.02);
}

#[test]
fn step_ratio_grid_crosses_at_the_step_radius() {
    let n = 64;
    let g = grid(n, TransformKind::Dct, |d0| if d0 <= 2.0 * 0.4 * 0.4 { 1.0 } else { 4.0 });
    let cal = calibrate(&g, CalibDirection::Sgm, TransformKind::Dct).unwrap();
    let values = g.values();
    let ave = values.iter().sum::<f64>() / values.len() as f64;
    let step = 1.0 / n as f64;
    for r in [cal.params.r1, cal.params.r2] {
        assert!((r - 0.4).abs() <= step, "r = {r}");
    }
    assert!((cal.params.lambda1 - ave / brute_quantile(values, 0.75)).abs() < 1e-12);
    assert!((cal.params.lambda2 - ave / brute_quantile(values, 0.9)).abs() < 1e-12);
}

#[test]
fn kappa_is_monotone_for_monotone_ratios() {
    for kind in [TransformKind::Dct, TransformKind::Dft] {
        let up = grid(24, kind, |d0| 1.0 + d0);
        let curve = kappa_curve(&up, kind);
        assert!(curve.windows(2).all(|w| w[1].1 >= w[0].1));
        assert!(curve.last().unwrap().1 > curve[0].1);
        let down = grid(24, kind, |d0| 1.0 / (1.0 + d0));
        let curve = kappa_curve(&down, kind);
        assert!(curve.windows(2).all(|w| w[1].1 <= w[0].1));
    }
}

#[test]
fn ddpm_direction_calibrates_decreasing_ratios() {
    let g = grid(32, TransformKind::Dft, |d0| 1.0 / (1.0 + 4.0 * d0));
    let cal = calibrate(&g, CalibDirection::Ddpm, TransformKind::Dft).unwrap();
    assert!(cal.params.lambda1 > 1.0 && cal.params.lambda2 >= cal.params.lambda1);
    assert!(cal.params.r1 > 0.0 && cal.params.r1 <= cal.params.r2);
    let k1 = kappa(&g, cal.params.r1, TransformKind::Dft).unwrap();
    assert!(k1 <= cal.quantiles.0);
}

#[test]
fn calibration_is_invariant_to_a_global_ratio_scale() {
    let g = grid(32, TransformKind::Dct, |d0| 1.0 + 3.0 * d0 * d0);
    let base = calibrate(&g, CalibDirection::Sgm, TransformKind::Dct).unwrap();
    for c in [0.25, 2.0, 8.0] {
        let scaled = RatioGrid::from_tensor(g.gamma.scale(c), TransformKind::Dct).unwrap();
        let cal = calibrate(&scaled, CalibDirection::Sgm, TransformKind::Dct).unwrap();
        assert_eq!(cal.params.r1, base.params.r1);
        assert_eq!(cal.params.r2, base.params.r2);
        assert!((cal.params.lambda1 - base.params.lambda1).abs() < 1e-12);
        assert!((cal.params.lambda2 - base.params.lambda2).abs() < 1e-12);
    }
}

#[test]
fn dc_power_of_a_single_sample() {
    let shape = Shape::new(1, 2, 2).unwrap();
    let x = Tensor::from_vec(shape, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let stats = freq_power_stats(&ImageDataset::new(vec![x]).unwrap(), TransformKind::Dct);
    let dc = 10.0 * (1.0f64 / 4.0).sqrt();
    assert!((stats.power[(0, 0, 0)] - dc * dc).abs() < 1e-12);
    let dft = freq_power_stats(&ImageDataset::new(vec![Tensor::ones(shape)]).unwrap(), TransformKind::Dft);
    assert!((dft.power[(0, 0, 0)] - 16.0).abs() < 1e-12);
}

#[test]
fn identical_sets_give_unit_ratio_everywhere() {
    let shape = Shape::new(3, 8, 8).unwrap();
    let mut src = NoiseSource::new(4);
    let ds = ImageDataset::new((0..6).map(|_| src.draw_normal(shape)).collect()).unwrap();
    let s = freq_power_stats(&ds, TransformKind::Dft);
    assert_eq!(s.power.shape(), Shape::new(1, 8, 8).unwrap());
    let g = ratio_grid(&s, &s).unwrap();
    assert!(g.values().iter().all(|&v| v == 1.0));
}
