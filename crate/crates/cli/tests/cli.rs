use std::path::Path;
use std::process::{Command, Output};

use hdcgan_cli::curves::{emit_curves, least_squares, read_series};
use hdcgan_cli::{subcommand_names, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};
use hdcgan_core::image::Image;
use hdcgan_core::metrics::MetricReport;
use hdcgan_core::train::read_loss_csv;
use proptest::prelude::*;

fn hdcgan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdcgan"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_png(path: &Path, size: usize, seed: u64) {
    let v: Vec<f64> = (0..3 * size * size)
        .map(|i| (((i as u64 * 2654435761 + seed * 97) % 1000) as f64 / 500.0 - 1.0) * 0.9)
        .collect();
    Image::new(3, size, size, v)
        .unwrap()
        .save_png(path)
        .unwrap();
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = hdcgan(&["train", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn runtime_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = hdcgan(&["eval-msssim", "--images", s(&dir.path().join("missing"))]);
    assert_eq!(out.status.code(), Some(EXIT_RUNTIME));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(hdcgan(&["--help"]).status.code(), Some(EXIT_OK));
    assert_eq!(hdcgan(&["--version"]).status.code(), Some(EXIT_OK));
}

#[test]
fn help_lists_every_default() {
    let cmd = <hdcgan_cli::args::Cli as clap::CommandFactory>::command();
    for name in subcommand_names() {
        let out = hdcgan(&[&name, "--help"]);
        assert_eq!(out.status.code(), Some(EXIT_OK), "{name}");
        let text = String::from_utf8_lossy(&out.stdout);
        let sub = cmd.find_subcommand(&name).unwrap();
        for arg in sub.get_arguments() {
            let Some(long) = arg.get_long() else { continue };
            if long == "help" || long == "version" {
                continue;
            }
            assert!(
                text.contains(&format!("--{long}")),
                "{name} --help misses --{long}"
            );
            for d in arg.get_default_values() {
                if arg.get_action().takes_values() {
                    let shown = format!("[default: {}]", d.to_string_lossy());
                    assert!(text.contains(&shown), "{name} --{long}: missing {shown}");
                }
            }
        }
    }
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("moments.toml");
    std::fs::write(&cfg, "iterations = 2\nsamples = 1000\nmean = 0.25\n").unwrap();
    let out = hdcgan(&["moments-demo", "--config", s(&cfg), "--iterations", "3"]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<&str> = text.lines().collect();
    // Header, the starting point, then one row per iteration.
    assert_eq!(rows.len(), 1 + 1 + 3, "{text}");
    assert!(rows[1].starts_with("0,0.25,1.5,"), "{}", rows[1]);

    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    let out = hdcgan(&["moments-demo", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(EXIT_RUNTIME));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn train_writes_checkpoint_and_loss_log() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = hdcgan(&[
        "train",
        "--size",
        "32",
        "--epochs",
        "1",
        "--batch",
        "32",
        "--lr",
        "0.0002",
        "--seed",
        "7",
        "--filters",
        "4",
        "--latent",
        "8",
        "--synthetic-count",
        "64",
        "--grid",
        "4",
        "--out",
        s(&run),
    ]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(run.join("checkpoint.hdck").is_file());
    assert!(run.join("grid_epoch001.png").is_file());
    let log = read_loss_csv(&run.join("losses.csv")).unwrap();
    assert_eq!(log.len(), 2);
    assert!(log
        .iter()
        .all(|r| r.d_loss.is_finite() && r.g_loss.is_finite()));
}

#[test]
fn identical_images_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = dir.path().join("same");
    std::fs::create_dir_all(&imgs).unwrap();
    for i in 0..4 {
        write_png(&imgs.join(format!("{i}.png")), 24, 1);
    }
    let out_dir = dir.path().join("report");
    let out = hdcgan(&[
        "eval-msssim",
        "--images",
        s(&imgs),
        "--pairs",
        "100",
        "--resize",
        "128",
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = MetricReport::read_json(&out_dir.join("report.json")).unwrap();
    assert!((r.value - 1.0).abs() < 1e-12, "{}", r.value);
    assert_eq!(r.pairs, Some(100));
    assert_eq!(r.resize, 128);
}

#[test]
fn nearest_neighbours_are_sorted() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir_all(&corpus).unwrap();
    for i in 0..8 {
        write_png(&corpus.join(format!("c{i}.png")), 16, i);
    }
    let q = dir.path().join("q.png");
    write_png(&q, 16, 3);
    let out = hdcgan(&["nn", "--k", "5", "--query", s(&q), "--corpus", s(&corpus)]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 5, "{text}");
    let d: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(d.windows(2).all(|w| w[0] <= w[1]), "{d:?}");
    assert_eq!(rows[0][2], "c3.png");
    assert_eq!(d[0], 0.0);
}

#[test]
fn curves_reject_malformed_rows_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "epoch,score\n1,0.5\n2,zero\n").unwrap();
    let err = read_series(&csv, Some("epoch")).unwrap_err();
    assert!(format!("{err:#}").contains("line 3"), "{err:#}");
    let out = hdcgan(&[
        "curves",
        "--input",
        s(&csv),
        "--out",
        s(&dir.path().join("c")),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_RUNTIME));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn curves_emit_series_fits_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scores.csv");
    std::fs::write(&csv, "epoch,msssim\n1,1.0\n3,3.0\n").unwrap();
    let fits = emit_curves(&csv, Some("epoch"), &dir.path().join("out")).unwrap();
    assert_eq!(fits.len(), 1);
    assert_eq!((fits[0].1.slope, fits[0].1.intercept), (1.0, 0.0));
    let svg = std::fs::read_to_string(dir.path().join("out/curves.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("msssim"));
    let tidy = std::fs::read_to_string(dir.path().join("out/series.csv")).unwrap();
    assert_eq!(tidy, "series,x,y\nmsssim,1,1\nmsssim,3,3\n");
}

/// Closed-form least squares from the 2×2 normal equations
/// `[n Σx; Σx Σx²]·[b; m] = [Σy; Σxy]`, solved by Cramer's rule.
fn normal_equations(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let det = n * sxx - sx * sx;
    ((n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
}

proptest! {
    #[test]
    fn least_squares_matches_normal_equations(
        ys in prop::collection::vec(-10.0f64..10.0, 10),
        x0 in -5.0f64..5.0,
        dx in 0.1f64..2.0,
    ) {
        let points: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (x0 + dx * i as f64, y)).collect();
        let fit = least_squares(&points).unwrap();
        let (slope, intercept) = normal_equations(&points);
        prop_assert!((fit.slope - slope).abs() < 1e-10, "{} vs {}", fit.slope, slope);
        prop_assert!((fit.intercept - intercept).abs() < 1e-10, "{} vs {}", fit.intercept, intercept);
        prop_assert_eq!(fit.n, 10);
    }
}
