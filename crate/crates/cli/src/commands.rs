use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use hdcgan_core::dataset::{self, DatasetManifest, IngestOptions};
use hdcgan_core::image::{
    images_from_tensor, images_to_tensor, list_image_files, load_dir, tile_grid, Image,
    Interpolation,
};
use hdcgan_core::layers::{moment_map, BsOrder, MomentPair, SeluParams};
use hdcgan_core::metrics::{
    fd_protocol, fit_gaussian, frechet_distance, msssim_protocol, nearest_neighbors,
    read_feature_file, FdMode, FdProtocol, FeatureExtractor, MetricReport, MsSsimProtocol,
};
use hdcgan_core::model::{apply_glasses, NetworkConfig};
use hdcgan_core::train::{
    epoch_batches, gather_batch, load_checkpoint, save_checkpoint, train_step, write_loss_csv,
    TrainConfig, TrainState,
};
use hdcgan_tensor::{RngStream, Tensor};

use crate::args::*;
use crate::curves::emit_curves;

/// Stream numbers for the CLI's own random choices.
const GRID_STREAM: u64 = 3000;
const BALANCE_STREAM: u64 = 4000;
const GENERATE_STREAM: u64 = 5000;

pub const CHECKPOINT_FILE: &str = "checkpoint.hdck";
pub const LOSS_FILE: &str = "losses.csv";

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::DatasetBuild(a) => dataset_build(&a),
        Command::Train(a) => train(&a),
        Command::Generate(a) => generate(&a),
        Command::EvalMsssim(a) => eval_msssim(&a),
        Command::EvalFd(a) => eval_fd(&a),
        Command::Nn(a) => nn(&a),
        Command::MomentsDemo(a) => moments_demo(&a),
        Command::Curves(a) => {
            let fits = emit_curves(&a.input, a.x.as_deref(), &a.out)?;
            for (name, f) in fits {
                println!(
                    "{name}: slope {} intercept {} ({} points)",
                    f.slope, f.intercept, f.n
                );
            }
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn interpolation(a: InterpolationArg) -> Interpolation {
    match a {
        InterpolationArg::Bilinear => Interpolation::Bilinear,
        InterpolationArg::Nearest => Interpolation::Nearest,
    }
}

fn dataset_build(a: &DatasetBuildArgs) -> Result<()> {
    create_dir(&a.out)?;
    let opts = IngestOptions {
        target_size: a.size,
        attributes_csv: a.attributes.clone(),
        interpolation: interpolation(a.interpolation),
    };
    let report = dataset::ingest(&a.input, &a.out, &opts)?;
    for (path, why) in &report.skipped {
        log::warn!("skipped {} ({why})", path.display());
    }
    let mut manifest = report.manifest;
    if a.mirror {
        manifest = dataset::mirror_augment(&manifest);
        manifest.save(&a.out)?;
    }
    println!(
        "{} records ({} skipped) at {}x{} in {}",
        manifest.len(),
        report.skipped.len(),
        a.size,
        a.size,
        a.out.display()
    );
    Ok(())
}

/// Training images as an `[N, 3, s, s]` tensor, plus the manifest when
/// they come from a dataset folder.
fn training_data(
    a: &TrainArgs,
    size: usize,
    seed: u64,
) -> Result<(Tensor<f32>, Option<DatasetManifest>)> {
    match &a.data {
        Some(dir) => {
            let m = DatasetManifest::open(dir)?;
            ensure!(
                m.image_size == size,
                "{} holds {}px images but the network is configured for {size}px (set --size {})",
                dir.display(),
                m.image_size,
                m.image_size
            );
            let images = m.load_images(dir)?;
            Ok((images_to_tensor(&images)?, Some(m)))
        }
        None => {
            ensure!(a.balance.is_none(), "--balance needs --data");
            let (images, _) = dataset::synthetic_two_class(a.synthetic_count, size, seed);
            Ok((images_to_tensor(&images)?, None))
        }
    }
}

fn fresh_state(a: &TrainArgs) -> Result<TrainState<f32>> {
    let network = NetworkConfig {
        base_size: (a.size, a.size),
        telescope: a.telescope,
        latent_dim: a.latent,
        n_filters: a.filters,
        channels: 3,
        bs_order: match a.bs_order {
            BsOrderArg::SeluThenNorm => BsOrder::SeluThenNorm,
            BsOrderArg::NormThenSelu => BsOrder::NormThenSelu,
        },
    };
    let config = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch,
        noise_amplitude: a.noise_amp,
        noise_on_d_input: !a.no_input_noise,
        noise_on_latent: !a.no_latent_noise,
        epochs: a.epochs,
        seed: a.common.seed,
        checkpoint_every: a.checkpoint_every,
        ..TrainConfig::default()
    };
    Ok(TrainState::new(network, config)?)
}

fn epoch_plan(
    a: &TrainArgs,
    state: &TrainState<f32>,
    n: usize,
    manifest: Option<&DatasetManifest>,
    epoch: u64,
) -> Result<Vec<Vec<usize>>> {
    let batch = state.config.batch_size;
    let seed = state.config.seed;
    let batches = match (&a.balance, manifest) {
        (Some(attr), Some(m)) => dataset::balanced_batches(
            m,
            attr,
            batch,
            &mut RngStream::new(seed, BALANCE_STREAM + epoch),
        )?,
        _ => epoch_batches(n, batch, seed, epoch),
    };
    ensure!(
        !batches.is_empty(),
        "{n} images are fewer than one batch of {batch}"
    );
    Ok(batches)
}

fn write_grid(state: &mut TrainState<f32>, count: usize, path: &Path) -> Result<()> {
    let z = RngStream::new(state.config.seed, GRID_STREAM).normal_tensor(
        &[count, state.network.latent_dim],
        0.0,
        1.0,
    );
    let images = images_from_tensor(&state.generate(&z)?)?;
    let columns = (count as f64).sqrt().ceil() as usize;
    tile_grid(&images, columns)?.save_png(path)?;
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    create_dir(&a.out)?;
    let mut state = match &a.checkpoint {
        Some(path) => {
            let s: TrainState<f32> = load_checkpoint(path)?;
            log::info!(
                "resuming {} at epoch {} step {}",
                path.display(),
                s.epoch,
                s.step
            );
            s
        }
        None => fresh_state(a)?,
    };
    let (base, _) = state.network.base_size;
    let (data, manifest) = training_data(a, base, state.config.seed)?;
    let data = apply_glasses(&data, state.network.telescope, Interpolation::Bilinear)?;
    let n = data.shape()[0];
    let limit = if a.max_steps == 0 {
        u64::MAX
    } else {
        a.max_steps
    };
    let ckpt = a.out.join(CHECKPOINT_FILE);

    while state.epoch < a.epochs && state.step < limit {
        let epoch = state.epoch;
        let batches = epoch_plan(a, &state, n, manifest.as_ref(), epoch)?;
        // A checkpoint taken mid-epoch resumes at the next batch.
        let done = (state.step - epoch * batches.len() as u64) as usize;
        for idx in batches.iter().skip(done) {
            if state.step >= limit {
                break;
            }
            let l = train_step(&mut state, &gather_batch(&data, idx)?)?;
            if state.step % 50 == 0 {
                log::info!(
                    "step {} d_loss {:.4} g_loss {:.4}",
                    state.step,
                    l.d_loss,
                    l.g_loss
                );
            }
        }
        if (state.step - epoch * batches.len() as u64) as usize == batches.len() {
            state.epoch += 1;
            if a.grid > 0 {
                let path = a.out.join(format!("grid_epoch{:03}.png", state.epoch));
                write_grid(&mut state, a.grid, &path)?;
            }
            if a.checkpoint_every > 0 && state.epoch % a.checkpoint_every == 0 {
                save_checkpoint(
                    &state,
                    &a.out
                        .join(format!("checkpoint_epoch{:03}.hdck", state.epoch)),
                )?;
            }
        }
        write_loss_csv(&state.history, &a.out.join(LOSS_FILE))?;
        save_checkpoint(&state, &ckpt)?;
    }
    write_loss_csv(&state.history, &a.out.join(LOSS_FILE))?;
    save_checkpoint(&state, &ckpt)?;
    match state.history.last() {
        Some(r) => println!(
            "epoch {} step {}: d_loss {:.6} g_loss {:.6}; wrote {}",
            state.epoch,
            state.step,
            r.d_loss,
            r.g_loss,
            a.out.display()
        ),
        None => println!("nothing to do; wrote {}", a.out.display()),
    }
    Ok(())
}

fn generate(a: &GenerateArgs) -> Result<()> {
    ensure!(a.count > 0, "--count must be positive");
    let mut state: TrainState<f32> = load_checkpoint(&a.checkpoint)?;
    create_dir(&a.out)?;
    let z = RngStream::new(a.common.seed, GENERATE_STREAM).normal_tensor(
        &[a.count, state.network.latent_dim],
        0.0,
        1.0,
    );
    let images = images_from_tensor(&state.generate(&z)?)?;
    tile_grid(&images, a.columns)?.save_png(&a.out.join("grid.png"))?;
    if a.individual {
        for (i, im) in images.iter().enumerate() {
            im.save_png(&a.out.join(format!("sample_{i:05}.png")))?;
        }
    }
    println!("{} samples written to {}", images.len(), a.out.display());
    Ok(())
}

fn write_report(r: &MetricReport, out: &Path) -> Result<()> {
    create_dir(out)?;
    r.write_json(&out.join("report.json"))?;
    MetricReport::write_csv(std::slice::from_ref(r), &out.join("report.csv"))?;
    println!(
        "{} = {} (resize {}, seed {})",
        r.metric, r.value, r.resize, r.seed
    );
    Ok(())
}

fn eval_msssim(a: &EvalMsssimArgs) -> Result<()> {
    let images = load_dir(&a.images)?;
    let p = MsSsimProtocol {
        pairs: a.pairs,
        resize: a.resize,
        seed: a.common.seed,
        keep_pairs: a.keep_pairs,
        ..MsSsimProtocol::default()
    };
    write_report(&msssim_protocol(&images, &p)?, &a.out)
}

fn eval_fd(a: &EvalFdArgs) -> Result<()> {
    let mode = match a.mode {
        FdModeArg::Pooled => FdMode::Pooled,
        FdModeArg::PerEpochMean => FdMode::PerEpochMean,
    };
    let report = if let Some(real_path) = &a.features_file {
        ensure!(
            !a.generated_features.is_empty(),
            "--features-file needs --generated-features"
        );
        let real = fit_gaussian(&read_feature_file(real_path)?)?;
        let sets: Vec<Vec<Vec<f64>>> = a
            .generated_features
            .iter()
            .map(|p| read_feature_file(p))
            .collect::<Result<_, _>>()?;
        let value = match mode {
            FdMode::Pooled => frechet_distance(&real, &fit_gaussian(&sets.concat())?)?,
            FdMode::PerEpochMean => {
                let mut total = 0.0;
                for s in &sets {
                    total += frechet_distance(&real, &fit_gaussian(s)?)?;
                }
                total / sets.len() as f64
            }
        };
        MetricReport {
            metric: "fd".into(),
            value,
            pairs: None,
            resize: a.resize,
            seed: a.common.seed,
            mode: Some(mode.name().into()),
            per_pair: None,
        }
    } else {
        let Some(real_dir) = &a.real else {
            bail!("give --real and --generated, or --features-file and --generated-features");
        };
        ensure!(
            !a.generated.is_empty(),
            "--generated is required with --real"
        );
        let real = load_dir(real_dir)?;
        let generated: Vec<Vec<Image>> = a
            .generated
            .iter()
            .map(|d| load_dir(d))
            .collect::<Result<_, _>>()?;
        let p = FdProtocol {
            resize: a.resize,
            extractor: a.extractor.parse::<FeatureExtractor>()?,
            mode,
            seed: a.common.seed,
        };
        fd_protocol(&real, &generated, &p)?
    };
    write_report(&report, &a.out)
}

fn nn(a: &NnArgs) -> Result<()> {
    let files: Vec<PathBuf> = list_image_files(&a.corpus)?;
    let fit = |im: Image| {
        if a.resize > 0 {
            im.resize(a.resize, a.resize, Interpolation::Bilinear)
        } else {
            im
        }
    };
    let corpus: Vec<Image> = files
        .iter()
        .map(|p| Image::load(p).map(fit))
        .collect::<Result<_, _>>()?;
    let query = fit(Image::load(&a.query)?);
    let hits = nearest_neighbors(&query, &corpus, a.k)?;
    let mut table = String::from("rank,index,file,distance\n");
    for (rank, h) in hits.iter().enumerate() {
        let name = files[h.index]
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        table.push_str(&format!(
            "{},{},{},{}\n",
            rank + 1,
            h.index,
            name,
            h.distance
        ));
    }
    print!("{table}");
    if let Some(out) = &a.out {
        std::fs::write(out, &table).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn moments_demo(a: &MomentsArgs) -> Result<()> {
    let mut rng = RngStream::new(a.common.seed, 0);
    let mut current = MomentPair::new(a.mean, a.variance)?;
    let mut table = String::from("iteration,mean,variance,mean_se,variance_se,distance\n");
    let target = MomentPair::new(0.0, 1.0)?;
    table.push_str(&format!(
        "0,{},{},0,0,{}\n",
        current.mean,
        current.variance,
        current.distance(&target)
    ));
    for i in 1..=a.iterations {
        let est = moment_map(
            current,
            a.omega,
            a.tau,
            SeluParams::STANDARD,
            a.samples,
            &mut rng,
        )?;
        current = est.moments;
        table.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            current.mean,
            current.variance,
            est.mean_se,
            est.variance_se,
            current.distance(&target)
        ));
    }
    print!("{table}");
    if let Some(out) = &a.out {
        std::fs::write(out, &table).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}
