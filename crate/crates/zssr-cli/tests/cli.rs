//! End-to-end tests running the compiled binary.

use std::path::Path;
use std::process::{Command, Output};

use zssr_core::Image;

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zssr"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should launch")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn gradient(h: usize, w: usize) -> Image {
    let mut img = Image::zeros(h, w, 1);
    for y in 0..h {
        for x in 0..w {
            let v = (y as f64 / h as f64 + x as f64 / w as f64) / 2.0;
            img.set(0, y, x, v);
        }
    }
    img
}

const FAST_SR: [&str; 12] = [
    "--scale", "2", "--iters", "3", "--hidden", "1", "--channels", "4", "--crop", "16",
    "--gradual", "1",
];

#[test]
fn sr_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    gradient(40, 40).save_png(dir.path().join("in.png")).unwrap();

    for out_name in ["a.png", "b.png"] {
        let mut args = vec!["sr", "in.png", "--seed", "7", "--out", out_name];
        args.extend_from_slice(&FAST_SR);
        let out = run_in(dir.path(), &args);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = std::fs::read(dir.path().join("a.png")).unwrap();
    let b = std::fs::read(dir.path().join("b.png")).unwrap();
    assert_eq!(a, b);

    let sr = Image::load(dir.path().join("a.png")).unwrap();
    assert_eq!((sr.height(), sr.width()), (80, 80));
}

#[test]
fn sr_rejects_a_scale_of_one() {
    let dir = tempfile::tempdir().unwrap();
    gradient(40, 40).save_png(dir.path().join("in.png")).unwrap();
    let out = run_in(dir.path(), &["sr", "in.png", "--scale", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("scale"));
}

#[test]
fn sr_requires_a_scale() {
    let dir = tempfile::tempdir().unwrap();
    gradient(40, 40).save_png(dir.path().join("in.png")).unwrap();
    let out = run_in(dir.path(), &["sr", "in.png"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--scale"));
}

#[test]
fn noise_sigma_without_inject_noise_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    gradient(40, 40).save_png(dir.path().join("in.png")).unwrap();
    let out = run_in(
        dir.path(),
        &["sr", "in.png", "--scale", "2", "--noise-sigma", "0.05"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--inject-noise"));
}

#[test]
fn malformed_kernel_files_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    gradient(40, 40).save_png(dir.path().join("in.png")).unwrap();
    std::fs::write(dir.path().join("k.txt"), "not a kernel\n").unwrap();
    let mut args = vec!["sr", "in.png", "--kernel", "k.txt"];
    args.extend_from_slice(&FAST_SR);
    let out = run_in(dir.path(), &args);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line"));
}

#[test]
fn unknown_flags_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["sr", "in.png", "--scale", "2", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("zssr"));
}

#[test]
fn sr_writes_a_report_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    gradient(40, 40).save_png(dir.path().join("in.png")).unwrap();
    let mut args = vec!["sr", "in.png", "--report", "report.txt"];
    args.extend_from_slice(&FAST_SR);
    let out = run_in(dir.path(), &args);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("command: sr"));
    assert!(report.contains("step1_iterations:"));
    assert!(stdout(&out).contains("step1_pool_size:"));
}

#[test]
fn gaussian_kernel_taps_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "make-kernel", "--gaussian", "--lambda1", "1.2", "--lambda2", "0.6", "--theta",
            "0.5", "--scale", "2", "--out", "k.txt",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let kernel = zssr_core::resample::load_kernel(dir.path().join("k.txt")).unwrap();
    let sum: f64 = kernel.taps().iter().sum();
    assert!((sum - 1.0).abs() < 1e-9);
}

#[test]
fn random_kernels_are_seed_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out_name in ["a.txt", "b.txt"] {
        let out = run_in(
            dir.path(),
            &["make-kernel", "--random", "--scale", "2", "--seed", "11", "--out", out_name],
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let out = run_in(
        dir.path(),
        &["make-kernel", "--random", "--scale", "2", "--seed", "12", "--out", "c.txt"],
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let a = std::fs::read(dir.path().join("a.txt")).unwrap();
    let b = std::fs::read(dir.path().join("b.txt")).unwrap();
    let c = std::fs::read(dir.path().join("c.txt")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn make_kernel_rejects_out_of_range_theta() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "make-kernel", "--gaussian", "--lambda1", "1.0", "--lambda2", "1.0", "--theta",
            "4.0", "--scale", "2", "--out", "k.txt",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn make_kernel_needs_exactly_one_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["make-kernel", "--scale", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run_in(
        dir.path(),
        &["make-kernel", "--gaussian", "--random", "--scale", "2"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_of_identical_images_prints_inf() {
    let dir = tempfile::tempdir().unwrap();
    gradient(24, 24).save_png(dir.path().join("img.png")).unwrap();
    let out = run_in(
        dir.path(),
        &["eval", "--sr", "img.png", "--gt", "img.png"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "psnr=inf ssim=1.0");
}

#[test]
fn eval_needs_a_pair_or_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["eval"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run_in(
        dir.path(),
        &["eval", "--sr", "a.png", "--manifest", "m.csv"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn resize_halves_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    gradient(32, 32).save_png(dir.path().join("in.png")).unwrap();
    let out = run_in(
        dir.path(),
        &["resize", "in.png", "--scale", "0.5", "--antialias", "--out", "half.png"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let half = Image::load(dir.path().join("half.png")).unwrap();
    assert_eq!((half.height(), half.width()), (16, 16));
}

#[test]
fn degrade_writes_lows_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    gradient(64, 64).save_png(dir.path().join("a.png")).unwrap();
    gradient(64, 48).save_png(dir.path().join("b.png")).unwrap();
    let out = run_in(
        dir.path(),
        &[
            "degrade", "a.png", "b.png", "--mode", "ideal-bicubic", "--scale", "2", "--seed",
            "5", "--out-dir", "lr",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let a_lr = Image::load(dir.path().join("lr/a_lr.png")).unwrap();
    assert_eq!((a_lr.height(), a_lr.width()), (32, 32));
    let b_lr = Image::load(dir.path().join("lr/b_lr.png")).unwrap();
    assert_eq!((b_lr.height(), b_lr.width()), (32, 24));

    let manifest = std::fs::read_to_string(dir.path().join("lr/manifest.csv")).unwrap();
    assert!(manifest.starts_with("image,gt_path,mode,seed,params"));
    assert!(manifest.contains("ideal-bicubic"));
    assert!(manifest.contains(",5,"));
    assert!(manifest.contains(",6,"));
    assert!(manifest.contains("lr="));
}

#[test]
fn eval_manifest_mode_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    gradient(64, 64).save_png(dir.path().join("gt.png")).unwrap();
    let out = run_in(
        dir.path(),
        &["degrade", "gt.png", "--mode", "ideal-bicubic", "--scale", "2", "--out-dir", "."],
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let out = run_in(
        dir.path(),
        &[
            "eval", "--manifest", "manifest.csv", "--scores", "scores.csv", "--iters", "4",
            "--gradual", "1", "--crop", "16", "--hidden", "1", "--channels", "4",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let table = stdout(&out);
    assert!(table.contains("image,method,psnr_db,ssim"));
    assert!(table.contains("gt,bicubic,"));
    assert!(table.contains("gt,zssr,"));

    let scores = std::fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    assert!(scores.contains("mean,bicubic,"));
    assert!(scores.contains("mean,zssr,"));
}

#[test]
fn eval_manifest_with_missing_files_still_scores_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    gradient(64, 64).save_png(dir.path().join("gt.png")).unwrap();
    let out = run_in(
        dir.path(),
        &["degrade", "gt.png", "--mode", "ideal-bicubic", "--scale", "2", "--out-dir", "."],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
    let extra = manifest
        .lines()
        .nth(1)
        .unwrap()
        .replace("gt", "ghost");
    std::fs::write(
        dir.path().join("manifest.csv"),
        format!("{manifest}{extra}\n"),
    )
    .unwrap();

    let out = run_in(
        dir.path(),
        &[
            "eval", "--manifest", "manifest.csv", "--failures", "failed.csv", "--iters", "4",
            "--gradual", "1", "--crop", "16", "--hidden", "1", "--channels", "4",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("gt,zssr,"));
    let failed = std::fs::read_to_string(dir.path().join("failed.csv")).unwrap();
    assert!(failed.contains("ghost"));
}

#[test]
fn config_files_supply_flags_and_the_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    gradient(40, 40).save_png(dir.path().join("in.png")).unwrap();
    std::fs::write(
        dir.path().join("resize.cfg"),
        "# defaults\nscale=0.5\nantialias=true\n",
    )
    .unwrap();

    let out = run_in(
        dir.path(),
        &["resize", "in.png", "--config", "resize.cfg", "--out", "a.png"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let a = Image::load(dir.path().join("a.png")).unwrap();
    assert_eq!((a.height(), a.width()), (20, 20));

    let out = run_in(
        dir.path(),
        &[
            "resize", "in.png", "--config", "resize.cfg", "--scale", "0.25", "--out", "b.png",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let b = Image::load(dir.path().join("b.png")).unwrap();
    assert_eq!((b.height(), b.width()), (10, 10));
}

#[test]
fn unknown_config_keys_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    gradient(32, 32).save_png(dir.path().join("in.png")).unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "scael=0.5\n").unwrap();
    let out = run_in(
        dir.path(),
        &["resize", "in.png", "--config", "bad.cfg", "--scale", "0.5"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("scael"));
}
