use hdcgan_core::model::NetworkConfig;
use hdcgan_core::train::{
    d_loss, epoch_batches, g_loss, inject_noise, load_checkpoint, save_checkpoint, train_step,
    train_toy_discriminator, ToyConfig, ToyDistribution, TrainConfig, TrainState,
};
use hdcgan_tensor::{RngStream, Tensor};

fn tiny_net() -> NetworkConfig {
    NetworkConfig {
        base_size: (8, 8),
        latent_dim: 6,
        n_filters: 3,
        ..NetworkConfig::default()
    }
}

fn real_batch<T: hdcgan_tensor::Real>(n: usize, size: usize, seed: u64) -> Tensor<T> {
    RngStream::new(seed, 7)
        .normal_tensor::<T>(&[n, 3, size, size], 0.0, 0.5)
        .tanh()
        .unwrap()
}

#[test]
fn equilibrium_losses_are_ln2() {
    let half = Tensor::<f64>::full(&[16], 0.5);
    let ln2 = std::f64::consts::LN_2;
    assert!((d_loss(&half, &half).unwrap().item() - ln2).abs() < 1e-9);
    assert!((g_loss(&half).unwrap().item() - ln2).abs() < 1e-9);
}

#[test]
fn noise_injection_is_centered() {
    let n = 1_000_000;
    let x = Tensor::<f64>::zeros(&[n]);
    let y = inject_noise(&x, 1.0, &mut RngStream::new(11, 0)).unwrap();
    let mean = y.data().iter().sum::<f64>() / n as f64;
    assert!(mean.abs() < 0.004, "mean {mean}");

    let sigma = 0.1;
    let m = 100_000;
    let base: Vec<f64> = (0..m).map(|i| ((i % 17) as f64 / 8.0) - 1.0).collect();
    let before = base.iter().sum::<f64>() / m as f64;
    let x = Tensor::from_vec(base, &[m]).unwrap();
    let y = inject_noise(&x, sigma, &mut RngStream::new(12, 0)).unwrap();
    let after = y.data().iter().sum::<f64>() / m as f64;
    assert!((after - before).abs() < 4.0 * sigma / (m as f64).sqrt());
}

#[test]
fn train_step_is_deterministic_and_moves_both_networks() {
    let run = || {
        let mut s = TrainState::<f32>::new(
            tiny_net(),
            TrainConfig {
                seed: 3,
                ..Default::default()
            },
        )
        .unwrap();
        let g0: Vec<Vec<f32>> = s
            .generator
            .parameters()
            .iter()
            .map(|p| p.data().to_vec())
            .collect();
        let d0: Vec<Vec<f32>> = s
            .discriminator
            .parameters()
            .iter()
            .map(|p| p.data().to_vec())
            .collect();
        let real = real_batch::<f32>(4, 8, 1);
        let l1 = train_step(&mut s, &real).unwrap();
        let l2 = train_step(&mut s, &real).unwrap();
        let g_moved = s
            .generator
            .parameters()
            .iter()
            .zip(&g0)
            .any(|(p, o)| p.data() != o.as_slice());
        let d_moved = s
            .discriminator
            .parameters()
            .iter()
            .zip(&d0)
            .any(|(p, o)| p.data() != o.as_slice());
        assert!(g_moved && d_moved);
        (
            l1.d_loss.to_bits(),
            l1.g_loss.to_bits(),
            l2.d_loss.to_bits(),
            l2.g_loss.to_bits(),
        )
    };
    assert_eq!(run(), run());
}

#[test]
fn checkpoint_round_trip_preserves_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.ckpt");
    let real = real_batch::<f32>(4, 8, 2);
    let mut a = TrainState::<f32>::new(
        tiny_net(),
        TrainConfig {
            seed: 5,
            ..Default::default()
        },
    )
    .unwrap();
    train_step(&mut a, &real).unwrap();
    save_checkpoint(&a, &path).unwrap();
    let mut b = load_checkpoint::<f32>(&path).unwrap();
    assert_eq!(b.history, a.history);
    for _ in 0..2 {
        let la = train_step(&mut a, &real).unwrap();
        let lb = train_step(&mut b, &real).unwrap();
        assert_eq!(la.d_loss.to_bits(), lb.d_loss.to_bits());
        assert_eq!(la.g_loss.to_bits(), lb.g_loss.to_bits());
    }
    let z = Tensor::<f32>::ones(&[2, 6]);
    assert_eq!(
        a.generate(&z).unwrap().data(),
        b.generate(&z).unwrap().data()
    );
}

#[test]
fn epoch_training_keeps_history_finite() {
    let mut s = TrainState::<f32>::new(
        tiny_net(),
        TrainConfig {
            batch_size: 4,
            seed: 9,
            ..Default::default()
        },
    )
    .unwrap();
    let data = real_batch::<f32>(12, 8, 4);
    for e in 0..2 {
        s.train_epoch(&data, &epoch_batches(12, 4, 9, e)).unwrap();
    }
    assert_eq!(s.history.len(), 6);
    assert_eq!(s.epoch, 2);
    assert!(s
        .history
        .iter()
        .all(|r| r.d_loss.is_finite() && r.g_loss.is_finite()));
}

#[test]
fn toy_discriminator_reaches_best_response() {
    let points: Vec<f64> = (0..8).map(f64::from).collect();
    let raw_data = [1.0, 2.0, 3.0, 4.0, 4.0, 3.0, 2.0, 1.0];
    let raw_gen = [3.0, 1.0, 2.0, 2.0, 1.0, 4.0, 1.0, 2.0];
    let norm = |r: &[f64]| {
        let s: f64 = r.iter().sum();
        r.iter().map(|v| v / s).collect::<Vec<_>>()
    };
    let p_data = ToyDistribution::Discrete {
        points: points.clone(),
        probs: norm(&raw_data),
    };
    let p_g = ToyDistribution::Discrete {
        points: points.clone(),
        probs: norm(&raw_gen),
    };
    let probes: Vec<Vec<f64>> = points.iter().map(|&p| vec![p]).collect();
    let out = train_toy_discriminator(&p_data, &p_g, &probes, &ToyConfig::default()).unwrap();
    assert!(
        out.max_abs_error() < 0.05,
        "{:?} vs {:?}",
        out.learned,
        out.optimal
    );

    let same = train_toy_discriminator(&p_data, &p_data, &probes, &ToyConfig::default()).unwrap();
    assert!(
        same.learned.iter().all(|v| (v - 0.5).abs() < 0.02),
        "{:?}",
        same.learned
    );
}
