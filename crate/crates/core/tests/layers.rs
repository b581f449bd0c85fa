use hdcgan_core::layers::{
    batchnorm2d, moment_map, moment_map_with_draws, selu, weight_moments, BatchNormState, BsBlock,
    BsOrder, ConvKind, ConvLayer, MomentPair, SeluParams,
};
use hdcgan_tensor::{RngStream, Tensor};
use proptest::prelude::*;

/// Expectation of `f(z)` for `z ~ N(0, 1)` by composite Simpson on
/// `[-12, 12]`.
fn gauss_expect(f: impl Fn(f64) -> f64) -> f64 {
    let (a, b, n) = (-12.0f64, 12.0f64, 200_000usize);
    let h = (b - a) / n as f64;
    let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let g = |z: f64| f(z) * pdf(z);
    let mut s = g(a) + g(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * g(a + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn selu_constants_solve_the_fixed_point_equations() {
    // Zero mean fixes alpha independently of lambda.
    let pos = gauss_expect(|z| z.max(0.0));
    let neg = gauss_expect(|z| if z <= 0.0 { z.exp_m1() } else { 0.0 });
    let alpha = -pos / neg;
    // Unit second moment then fixes lambda.
    let second = gauss_expect(|z| {
        let u = if z > 0.0 { z } else { alpha * z.exp_m1() };
        u * u
    });
    let lambda = 1.0 / second.sqrt();
    let p = SeluParams::STANDARD;
    assert!((alpha - p.alpha).abs() < 1e-9, "alpha {alpha}");
    assert!((lambda - p.lambda).abs() < 1e-9, "lambda {lambda}");
    assert!((p.apply(1.0) - 1.050701).abs() < 1e-6);
    assert!((p.apply(-1.0) - -1.111330).abs() < 1e-6);
}

#[test]
fn moment_map_fixed_point_within_three_standard_errors() {
    let mut rng = RngStream::new(2024, 0);
    let est = moment_map(
        MomentPair::new(0.0, 1.0).unwrap(),
        0.0,
        1.0,
        SeluParams::STANDARD,
        100_000,
        &mut rng,
    )
    .unwrap();
    assert!(est.moments.mean.abs() < 3.0 * est.mean_se, "{est:?}");
    assert!(
        (est.moments.variance - 1.0).abs() < 3.0 * est.variance_se,
        "{est:?}"
    );
}

#[test]
fn moment_map_iteration_contracts_toward_unit_moments() {
    let mut rng = RngStream::new(7, 0);
    let draws: Vec<f64> = (0..1_000_000).map(|_| rng.normal()).collect();
    let target = MomentPair::new(0.0, 1.0).unwrap();
    let mut m = MomentPair::new(0.5, 1.5).unwrap();
    let mut dist = vec![m.distance(&target)];
    let mut floor = 0.0f64;
    for _ in 0..20 {
        let est = moment_map_with_draws(m, 0.0, 1.0, SeluParams::STANDARD, &draws).unwrap();
        floor = floor.max(4.0 * est.mean_se.hypot(est.variance_se));
        m = est.moments;
        dist.push(m.distance(&target));
    }
    // Strict decrease after one burn-in step until Monte-Carlo noise dominates.
    for k in 1..20 {
        if dist[k] > floor {
            assert!(dist[k + 1] < dist[k], "distances {dist:?}");
        }
    }
    assert!(dist[20] < floor.max(0.01), "distances {dist:?}");
    assert!(dist[20] < dist[0] / 10.0);
}

fn conv3(c_in: usize, c_out: usize, rng: &mut RngStream) -> ConvLayer<f64> {
    ConvLayer::new(ConvKind::Conv, c_in, c_out, 3, 1, 1, c_in * 9, false, rng)
}

fn channel_moments(y: &Tensor<f64>) -> Vec<(f64, f64)> {
    let [n, c, h, w] = *y.shape() else { panic!() };
    let hw = h * w;
    (0..c)
        .map(|ch| {
            let vals: Vec<f64> = (0..n)
                .flat_map(|s| y.data()[(s * c + ch) * hw..(s * c + ch + 1) * hw].to_vec())
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64;
            (m, v)
        })
        .collect()
}

fn stack_moments(order: BsOrder) -> Vec<Vec<(f64, f64)>> {
    let mut rng = RngStream::new(31, 0);
    let mut h = rng.normal_tensor::<f64>(&[16, 4, 32, 32], 0.0, 1.0);
    let mut out = Vec::new();
    let mut c_in = 4;
    for _ in 0..6 {
        let mut block = BsBlock::new(conv3(c_in, 6, &mut rng), order);
        h = block.forward(&h, true).unwrap();
        out.push(channel_moments(&h));
        c_in = 6;
    }
    out
}

#[test]
fn six_bs_blocks_keep_unit_moments() {
    for order in [BsOrder::SeluThenNorm, BsOrder::NormThenSelu] {
        for (k, layer) in stack_moments(order).iter().enumerate() {
            for &(m, v) in layer {
                assert!(
                    m.abs() < 0.1 && (0.9..1.1).contains(&v),
                    "{order:?} block {k}: ({m}, {v})"
                );
            }
        }
    }
    for layer in stack_moments(BsOrder::SeluThenNorm) {
        for (m, _) in layer {
            assert!(m.abs() < 1e-6);
        }
    }
}

#[test]
fn constant_input_stays_finite_through_blocks() {
    let mut rng = RngStream::new(1, 0);
    let mut h = Tensor::<f64>::full(&[2, 3, 8, 8], 0.7);
    for order in [BsOrder::SeluThenNorm, BsOrder::NormThenSelu] {
        let mut block = BsBlock::new(conv3(3, 3, &mut rng), order);
        h = block.forward(&h, true).unwrap();
        assert!(h.data().iter().all(|v| v.is_finite()));
    }
}

#[test]
fn batchnorm_standardizes_with_unit_affine() {
    let mut rng = RngStream::new(4, 0);
    let x = rng.normal_tensor::<f64>(&[2, 3, 4, 4], 2.0, 3.0);
    let mut s = BatchNormState::new(3);
    let y = batchnorm2d(&x, &mut s, true).unwrap();
    for (m, v) in channel_moments(&y) {
        assert!(m.abs() < 1e-6 && (v - 1.0).abs() < 1e-4);
    }
    let one = Tensor::<f64>::ones(&[1, 3, 1, 1]);
    assert!(batchnorm2d(&one, &mut s, true).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cauchy_schwarz_on_weight_moments(w in prop::collection::vec(-3.0f64..3.0, 64)) {
        let (omega, tau) = weight_moments(&w).unwrap();
        prop_assert!(tau >= omega * omega / 64.0 - 1e-12);
    }

    #[test]
    fn selu_is_monotone_and_continuous(a in -20.0f64..20.0, b in -20.0f64..20.0) {
        let p = SeluParams::STANDARD;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(p.apply(lo) <= p.apply(hi));
        prop_assert!((p.apply(1e-12) - p.apply(-1e-12)).abs() < 1e-10);
    }

    #[test]
    fn bs_block_output_is_finite(scale in 0.0f64..50.0, seed in 0u64..500) {
        let mut rng = RngStream::new(seed, 0);
        let x = rng.normal_tensor::<f64>(&[2, 2, 6, 6], 0.0, scale);
        let mut block = BsBlock::new(conv3(2, 3, &mut rng), BsOrder::SeluThenNorm);
        let y = block.forward(&x, true).unwrap();
        prop_assert!(y.data().iter().all(|v| v.is_finite()));
        let z = selu(&y, SeluParams::STANDARD).unwrap();
        prop_assert!(z.data().iter().all(|v| v.is_finite()));
    }
}
