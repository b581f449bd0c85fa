use hdcgan_core::image::Interpolation;
use hdcgan_core::model::{
    apply_glasses, build_discriminator, build_generator, layer_count, NetworkConfig,
};
use hdcgan_tensor::{RngStream, Tensor};

fn cfg(size: usize, filters: usize) -> NetworkConfig {
    NetworkConfig {
        base_size: (size, size),
        latent_dim: 8,
        n_filters: filters,
        ..NetworkConfig::default()
    }
}

#[test]
fn layer_rule_reference_points() {
    assert_eq!(layer_count(32).unwrap(), 4);
    assert_eq!(layer_count(256).unwrap(), 7);
    assert_eq!(layer_count(64).unwrap(), 5);
    assert_eq!(layer_count(512).unwrap(), 8);
}

#[test]
fn block_counts_and_shapes_for_every_size() {
    let mut rng = RngStream::new(0, 0);
    let mut prev = None;
    for k in 3..=9 {
        let s = 1usize << k;
        let c = cfg(s, 2);
        let g = build_generator::<f32>(&c, &mut rng).unwrap();
        let mut d = build_discriminator::<f32>(&c, &mut rng).unwrap();
        assert_eq!(g.block_count(), layer_count(s).unwrap());
        assert_eq!(d.block_count(), layer_count(s).unwrap());
        assert!(g
            .kernel_sizes()
            .iter()
            .chain(&d.kernel_sizes())
            .all(|&k| k == 4));
        if let Some(p) = prev {
            assert_eq!(g.block_count(), p + 1);
        }
        prev = Some(g.block_count());
        let p = d.forward(&Tensor::zeros(&[2, 3, s, s]), true).unwrap();
        assert_eq!(p.shape(), &[2]);
    }
}

#[test]
fn deep_generator_is_finite_in_f64() {
    let mut rng = RngStream::new(1, 0);
    let mut g = build_generator::<f64>(&cfg(512, 2), &mut rng).unwrap();
    assert_eq!(g.block_count(), 8);
    let z = rng.normal_tensor::<f64>(&[2, 8], 0.0, 1.0);
    let x = g.forward(&z, true).unwrap();
    assert_eq!(x.shape(), &[2, 3, 512, 512]);
    assert!(x.data().iter().all(|v| v.is_finite() && v.abs() <= 1.0));
}

#[test]
fn default_width_network_shapes() {
    let c = NetworkConfig::square(32);
    let mut rng = RngStream::new(2, 0);
    let mut g = build_generator::<f32>(&c, &mut rng).unwrap();
    let mut d = build_discriminator::<f32>(&c, &mut rng).unwrap();
    assert_eq!(c.latent_dim, 100);
    let x = g
        .forward(&rng.normal_tensor(&[2, 100], 0.0, 1.0), true)
        .unwrap();
    assert_eq!(x.shape(), &[2, 3, 32, 32]);
    assert!(x.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    let p = d.forward(&x, true).unwrap();
    assert!(p.data().iter().all(|v| *v > 0.0 && *v < 1.0));
}

#[test]
fn glasses_deepen_without_changing_kernels() {
    let base = cfg(64, 2);
    let enlarged = NetworkConfig {
        telescope: (2, 2),
        ..base.clone()
    };
    assert_eq!(base.layer_count().unwrap(), 5);
    assert_eq!(enlarged.layer_count().unwrap(), 6);
    let mut rng = RngStream::new(3, 0);
    let g = build_generator::<f32>(&enlarged, &mut rng).unwrap();
    let d = build_discriminator::<f32>(&enlarged, &mut rng).unwrap();
    assert_eq!(g.block_count(), 6);
    assert!(g
        .kernel_sizes()
        .iter()
        .chain(&d.kernel_sizes())
        .all(|&k| k == 4));

    let x = rng.normal_tensor::<f32>(&[1, 3, 64, 64], 0.0, 0.3);
    let y = apply_glasses(&x, (2, 2), Interpolation::Bilinear).unwrap();
    assert_eq!(y.shape(), &[1, 3, 128, 128]);
    let y = apply_glasses(&x, (2, 2), Interpolation::Nearest).unwrap();
    assert_eq!(y.data()[0], x.data()[0]);
}
