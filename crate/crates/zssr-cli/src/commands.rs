//! The five subcommands and their flag handling.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use log::warn;

use zssr_core::bench::{
    degrade, format_psnr, psnr_y, read_manifest, run_suite, ssim_y, write_failures,
    write_manifest, write_scores, DegradationMode, DegradeOptions, ManifestRow, SuiteConfig,
    ZssrVariant,
};
use zssr_core::resample::{
    gaussian_kernel, load_kernel, resize_bicubic_scale, sample_random_kernel, save_kernel,
    scaled_dim, GaussianKernelSpec,
};
use zssr_core::zssr::{run_gradual_with_report, Downscaler, ZssrConfig};
use zssr_core::{Error, Image};

use crate::config::{usage, AppResult, ConfigMap};

/// Replace the file name with `<stem><suffix>.png` next to the input.
fn derive_out(input: &Path, suffix: &str) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());
    input.with_file_name(format!("{stem}{suffix}.png"))
}

// ---------------------------------------------------------------------------
// sr
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SrArgs {
    /// Low-resolution input image.
    pub input: PathBuf,
    /// Key-value file supplying defaults for any flag below.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Super-resolution factor, must exceed 1.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Downscaling kernel file; the reference bicubic kernel when absent.
    #[arg(long, value_name = "FILE")]
    pub kernel: Option<PathBuf>,
    /// Number of gradual scale steps.
    #[arg(long, value_name = "M")]
    pub gradual: Option<usize>,
    /// Skip the back-projection consistency passes.
    #[arg(long)]
    pub no_backprojection: bool,
    /// Add noise to the training sons.
    #[arg(long)]
    pub inject_noise: bool,
    /// Standard deviation of the injected noise.
    #[arg(long, value_name = "X")]
    pub noise_sigma: Option<f64>,
    /// Iteration cap per scale step.
    #[arg(long, value_name = "N")]
    pub iters: Option<usize>,
    /// Random seed.
    #[arg(long, value_name = "K")]
    pub seed: Option<u64>,
    /// Training crop size.
    #[arg(long)]
    pub crop: Option<usize>,
    /// Hidden convolution layers.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Feature channels per hidden layer.
    #[arg(long)]
    pub channels: Option<usize>,
    /// Output image path; `<input>_sr.png` when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Write the full run report here.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

const SR_KEYS: [&str; 13] = [
    "scale",
    "kernel",
    "gradual",
    "no-backprojection",
    "inject-noise",
    "noise-sigma",
    "iters",
    "seed",
    "crop",
    "hidden",
    "channels",
    "out",
    "report",
];

pub fn cmd_sr(args: &SrArgs) -> AppResult<()> {
    let cfg_file = ConfigMap::load_opt(args.config.as_deref())?;
    cfg_file.ensure_known(&SR_KEYS)?;

    let scale = args
        .scale
        .or(cfg_file.get("scale")?)
        .ok_or_else(|| usage("--scale is required"))?;
    if !scale.is_finite() || scale <= 1.0 {
        return Err(usage(format!("--scale must exceed 1, got {scale}")));
    }
    let kernel_path: Option<PathBuf> = args.kernel.clone().or(cfg_file.get("kernel")?);
    let no_backprojection =
        args.no_backprojection || cfg_file.get_flag("no-backprojection")?;
    let inject_noise = args.inject_noise || cfg_file.get_flag("inject-noise")?;
    let noise_sigma: Option<f64> = args.noise_sigma.or(cfg_file.get("noise-sigma")?);
    if noise_sigma.is_some() && !inject_noise {
        return Err(usage("--noise-sigma only makes sense with --inject-noise"));
    }

    let defaults = ZssrConfig::default();
    let mut zssr = ZssrConfig {
        scale_factor: scale,
        gradual_steps: args.gradual.or(cfg_file.get("gradual")?).unwrap_or(defaults.gradual_steps),
        use_backprojection: !no_backprojection,
        inject_noise,
        max_iterations: args.iters.or(cfg_file.get("iters")?).unwrap_or(defaults.max_iterations),
        seed: args.seed.or(cfg_file.get("seed")?).unwrap_or(0),
        crop_size: args.crop.or(cfg_file.get("crop")?).unwrap_or(defaults.crop_size),
        hidden_layers: args.hidden.or(cfg_file.get("hidden")?).unwrap_or(defaults.hidden_layers),
        channels: args.channels.or(cfg_file.get("channels")?).unwrap_or(defaults.channels),
        ..defaults
    };
    if let Some(sigma) = noise_sigma {
        zssr.noise_sigma = sigma;
    }
    if let Some(path) = &kernel_path {
        zssr.downscaler = Downscaler::Kernel(load_kernel(path)?);
    }
    zssr.validate().map_err(|e| usage(e.to_string()))?;

    let out = args
        .out
        .clone()
        .or(cfg_file.get("out")?)
        .unwrap_or_else(|| derive_out(&args.input, "_sr"));
    let report_path: Option<PathBuf> = args.report.clone().or(cfg_file.get("report")?);

    let mut echo = String::new();
    let _ = writeln!(echo, "command: sr");
    let _ = writeln!(echo, "input: {}", args.input.display());
    let _ = writeln!(echo, "scale: {}", zssr.scale_factor);
    let _ = writeln!(
        echo,
        "kernel: {}",
        kernel_path
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "bicubic".into())
    );
    let _ = writeln!(echo, "gradual: {}", zssr.gradual_steps);
    let _ = writeln!(echo, "backprojection: {}", zssr.use_backprojection);
    let _ = writeln!(echo, "bp-iters: {}", zssr.backprojection_iters);
    let _ = writeln!(echo, "inject-noise: {}", zssr.inject_noise);
    let _ = writeln!(echo, "noise-sigma: {}", zssr.noise_sigma);
    let _ = writeln!(echo, "iters: {}", zssr.max_iterations);
    let _ = writeln!(echo, "crop: {}", zssr.crop_size);
    let _ = writeln!(echo, "hidden: {}", zssr.hidden_layers);
    let _ = writeln!(echo, "channels: {}", zssr.channels);
    let _ = writeln!(echo, "seed: {}", zssr.seed);
    let _ = writeln!(echo, "out: {}", out.display());

    let input = Image::load(&args.input)?;
    let (sr, report) = run_gradual_with_report(&input, &zssr)?;
    sr.save_png(&out)?;

    if let Some(path) = &report_path {
        let text = format!("{echo}\n{}", report.summary_text());
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    print!("{}", report.summary_text());
    println!("wrote {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// make-kernel
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct MakeKernelArgs {
    /// Key-value file supplying defaults for any flag below.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Build from explicit lambda1/lambda2/theta.
    #[arg(long)]
    pub gaussian: bool,
    /// Draw the parameters from the seeded sampler.
    #[arg(long)]
    pub random: bool,
    /// Variance along the first principal axis, in [0, scale^2].
    #[arg(long, value_name = "A")]
    pub lambda1: Option<f64>,
    /// Variance along the second principal axis, in [0, scale^2].
    #[arg(long, value_name = "B")]
    pub lambda2: Option<f64>,
    /// Rotation angle in radians, in [0, pi).
    #[arg(long, value_name = "T")]
    pub theta: Option<f64>,
    /// Scale factor the kernel is meant for, must exceed 1.
    #[arg(long, value_name = "S")]
    pub scale: Option<f64>,
    /// Seed for --random.
    #[arg(long, value_name = "K")]
    pub seed: Option<u64>,
    /// Kernel file to write.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

const MAKE_KERNEL_KEYS: [&str; 8] = [
    "gaussian", "random", "lambda1", "lambda2", "theta", "scale", "seed", "out",
];

pub fn cmd_make_kernel(args: &MakeKernelArgs) -> AppResult<()> {
    let cfg_file = ConfigMap::load_opt(args.config.as_deref())?;
    cfg_file.ensure_known(&MAKE_KERNEL_KEYS)?;

    let gaussian = args.gaussian || cfg_file.get_flag("gaussian")?;
    let random = args.random || cfg_file.get_flag("random")?;
    if gaussian == random {
        return Err(usage("pass exactly one of --gaussian or --random"));
    }
    let scale = args
        .scale
        .or(cfg_file.get("scale")?)
        .ok_or_else(|| usage("--scale is required"))?;
    let out = args
        .out
        .clone()
        .or(cfg_file.get("out")?)
        .unwrap_or_else(|| PathBuf::from("kernel.txt"));

    let (kernel, spec, seed) = if gaussian {
        let lambda1 = args
            .lambda1
            .or(cfg_file.get("lambda1")?)
            .ok_or_else(|| usage("--gaussian needs --lambda1"))?;
        let lambda2 = args
            .lambda2
            .or(cfg_file.get("lambda2")?)
            .ok_or_else(|| usage("--gaussian needs --lambda2"))?;
        let theta = args
            .theta
            .or(cfg_file.get("theta")?)
            .ok_or_else(|| usage("--gaussian needs --theta"))?;
        let spec = GaussianKernelSpec {
            lambda1,
            lambda2,
            theta,
            scale,
        };
        spec.validate().map_err(|e| usage(e.to_string()))?;
        (gaussian_kernel(&spec)?, spec, None)
    } else {
        if !scale.is_finite() || scale <= 1.0 {
            return Err(usage(format!("--scale must exceed 1, got {scale}")));
        }
        let seed = args.seed.or(cfg_file.get("seed")?).unwrap_or(0);
        let (kernel, spec) = sample_random_kernel(scale, seed)?;
        (kernel, spec, Some(seed))
    };

    save_kernel(&kernel, &out)?;
    let mut line = format!(
        "wrote {}: {}x{} taps, lambda1={} lambda2={} theta={} scale={}",
        out.display(),
        kernel.height(),
        kernel.width(),
        spec.lambda1,
        spec.lambda2,
        spec.theta,
        spec.scale,
    );
    if let Some(seed) = seed {
        let _ = write!(line, " seed={seed}");
    }
    println!("{line}");
    Ok(())
}

// ---------------------------------------------------------------------------
// degrade
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct DegradeArgs {
    /// Ground-truth images.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Key-value file supplying defaults for any flag below.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Degradation mode: ideal-bicubic, random-gaussian-kernel,
    /// delta-aliasing, gaussian-noise, speckle-noise or jpeg.
    #[arg(long)]
    pub mode: Option<String>,
    /// Downscaling factor.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Noise parameter: std for gaussian-noise, variance for speckle.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// JPEG quality for --mode jpeg.
    #[arg(long)]
    pub quality: Option<u8>,
    /// Base seed; image i uses seed + i.
    #[arg(long, value_name = "K")]
    pub seed: Option<u64>,
    /// Directory for the low-resolution outputs.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Manifest path; `<out-dir>/manifest.csv` when absent.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

const DEGRADE_KEYS: [&str; 7] = [
    "mode", "scale", "sigma", "quality", "seed", "out-dir", "manifest",
];

pub fn cmd_degrade(args: &DegradeArgs) -> AppResult<()> {
    let cfg_file = ConfigMap::load_opt(args.config.as_deref())?;
    cfg_file.ensure_known(&DEGRADE_KEYS)?;

    let mode: DegradationMode = match args.mode.clone().or(cfg_file.get("mode")?) {
        Some(raw) => raw.parse().map_err(|e: Error| usage(e.to_string()))?,
        None => return Err(usage("--mode is required")),
    };
    let scale = args.scale.or(cfg_file.get("scale")?).unwrap_or(2.0);
    let base_seed: u64 = args.seed.or(cfg_file.get("seed")?).unwrap_or(0);
    let out_dir = args
        .out_dir
        .clone()
        .or(cfg_file.get("out-dir")?)
        .unwrap_or_else(|| PathBuf::from("."));
    let manifest_path = args
        .manifest
        .clone()
        .or(cfg_file.get("manifest")?)
        .unwrap_or_else(|| out_dir.join("manifest.csv"));
    let mut opts = DegradeOptions::new(scale);
    opts.noise_param = args.sigma.or(cfg_file.get("sigma")?);
    opts.jpeg_quality = args.quality.or(cfg_file.get("quality")?);

    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let mut rows = Vec::with_capacity(args.inputs.len());
    let mut seen = Vec::new();
    for (i, input) in args.inputs.iter().enumerate() {
        let stem = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("image{i}"));
        if seen.contains(&stem) {
            warn!("duplicate image stem {stem:?}, output will be overwritten");
        }
        seen.push(stem.clone());

        let gt = Image::load(input)?;
        let seed = base_seed + i as u64;
        let (low, mut record) = degrade(&gt, mode, &opts, seed)?;
        record.source = stem.clone();
        let lr_path = out_dir.join(format!("{stem}_lr.png"));
        low.save_png(&lr_path)?;

        let params = format!("{};lr={}", record.params_string(), lr_path.display());
        rows.push(ManifestRow {
            image: stem.clone(),
            gt_path: input.display().to_string(),
            mode,
            seed,
            params,
        });
        println!("wrote {} ({} seed={seed})", lr_path.display(), mode);
    }
    write_manifest(&manifest_path, &rows)?;
    println!("wrote {}", manifest_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Key-value file supplying defaults for any flag below.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Super-resolved image to score (pair mode, with --gt).
    #[arg(long, value_name = "FILE")]
    pub sr: Option<PathBuf>,
    /// Ground truth to score against (pair mode, with --sr).
    #[arg(long, value_name = "FILE")]
    pub gt: Option<PathBuf>,
    /// Border shave in pixels; pair mode defaults to 0, manifest mode to
    /// the scale factor rounded up.
    #[arg(long)]
    pub shave: Option<usize>,
    /// Degradation manifest to evaluate (manifest mode).
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Variant to run, repeatable: zssr, zssr-true-kernel, zssr-noise.
    #[arg(long = "variant", value_name = "NAME")]
    pub variants: Vec<String>,
    /// Score table output path.
    #[arg(long, value_name = "PATH")]
    pub scores: Option<PathBuf>,
    /// Failure manifest output path.
    #[arg(long, value_name = "PATH")]
    pub failures: Option<PathBuf>,
    /// Iteration cap per scale step.
    #[arg(long, value_name = "N")]
    pub iters: Option<usize>,
    /// Number of gradual scale steps.
    #[arg(long, value_name = "M")]
    pub gradual: Option<usize>,
    /// Training crop size.
    #[arg(long)]
    pub crop: Option<usize>,
    /// Hidden convolution layers.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Feature channels per hidden layer.
    #[arg(long)]
    pub channels: Option<usize>,
    /// Random seed for the super-resolution runs.
    #[arg(long, value_name = "K")]
    pub seed: Option<u64>,
}

const EVAL_KEYS: [&str; 13] = [
    "sr", "gt", "shave", "manifest", "variant", "scores", "failures", "iters", "gradual",
    "crop", "hidden", "channels", "seed",
];

fn parse_variant(raw: &str) -> AppResult<ZssrVariant> {
    match raw {
        "zssr" => Ok(ZssrVariant::AssumedBicubic),
        "zssr-true-kernel" => Ok(ZssrVariant::TrueKernel),
        "zssr-noise" => Ok(ZssrVariant::NoiseInjection),
        other => Err(usage(format!(
            "unknown variant {other:?} (expected zssr, zssr-true-kernel or zssr-noise)"
        ))),
    }
}

pub fn cmd_eval(args: &EvalArgs) -> AppResult<()> {
    let cfg_file = ConfigMap::load_opt(args.config.as_deref())?;
    cfg_file.ensure_known(&EVAL_KEYS)?;

    let sr: Option<PathBuf> = args.sr.clone().or(cfg_file.get("sr")?);
    let gt: Option<PathBuf> = args.gt.clone().or(cfg_file.get("gt")?);
    let manifest: Option<PathBuf> = args.manifest.clone().or(cfg_file.get("manifest")?);
    let shave: Option<usize> = args.shave.or(cfg_file.get("shave")?);

    match (&sr, &gt, &manifest) {
        (Some(sr), Some(gt), None) => {
            let sr = Image::load(sr)?;
            let gt = Image::load(gt)?;
            let shave = shave.unwrap_or(0);
            let psnr = psnr_y(&sr, &gt, shave)?;
            let ssim = ssim_y(&sr, &gt, shave)?;
            println!("psnr={psnr:?} ssim={ssim:?}");
            Ok(())
        }
        (None, None, Some(manifest_path)) => {
            let mut variants = args.variants.clone();
            if variants.is_empty() {
                if let Some(raw) = cfg_file.get::<String>("variant")? {
                    variants = raw.split(',').map(|s| s.trim().to_string()).collect();
                }
            }
            if variants.is_empty() {
                variants.push("zssr".into());
            }
            let variants = variants
                .iter()
                .map(|v| parse_variant(v))
                .collect::<AppResult<Vec<_>>>()?;

            let defaults = ZssrConfig::default();
            let zssr = ZssrConfig {
                gradual_steps: args
                    .gradual
                    .or(cfg_file.get("gradual")?)
                    .unwrap_or(defaults.gradual_steps),
                max_iterations: args
                    .iters
                    .or(cfg_file.get("iters")?)
                    .unwrap_or(defaults.max_iterations),
                crop_size: args.crop.or(cfg_file.get("crop")?).unwrap_or(defaults.crop_size),
                hidden_layers: args
                    .hidden
                    .or(cfg_file.get("hidden")?)
                    .unwrap_or(defaults.hidden_layers),
                channels: args
                    .channels
                    .or(cfg_file.get("channels")?)
                    .unwrap_or(defaults.channels),
                seed: args.seed.or(cfg_file.get("seed")?).unwrap_or(0),
                ..defaults
            };
            zssr.validate().map_err(|e| usage(e.to_string()))?;
            let suite = SuiteConfig {
                variants,
                zssr,
                shave,
            };

            let rows = read_manifest(manifest_path)?;
            let total = rows.len();
            let outcome = run_suite(&rows, &suite);
            println!("image,method,psnr_db,ssim");
            for row in &outcome.scores {
                println!(
                    "{},{},{},{:.4}",
                    row.image,
                    row.method,
                    format_psnr(row.psnr_db),
                    row.ssim
                );
            }
            if let Some(path) = args.scores.clone().or(cfg_file.get("scores")?) {
                write_scores(&path, &outcome.scores)?;
            }
            if let Some(path) = args.failures.clone().or(cfg_file.get("failures")?) {
                if !outcome.failures.is_empty() {
                    write_failures(&path, &outcome.failures)?;
                }
            }
            if !outcome.failures.is_empty() {
                for f in &outcome.failures {
                    warn!("{}: {}", f.image, f.reason);
                }
                if outcome.scores.is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "all {total} manifest rows failed"
                    ))
                    .into());
                }
            }
            Ok(())
        }
        _ => Err(usage(
            "pass either --sr and --gt for one pair, or --manifest for a suite",
        )),
    }
}

// ---------------------------------------------------------------------------
// resize
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct ResizeArgs {
    /// Input image.
    pub input: PathBuf,
    /// Key-value file supplying defaults for any flag below.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Resize factor; values below 1 shrink.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Stretch the kernel when shrinking, the reference antialias behavior.
    #[arg(long)]
    pub antialias: bool,
    /// Output image path; `<input>_resized.png` when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

const RESIZE_KEYS: [&str; 3] = ["scale", "antialias", "out"];

pub fn cmd_resize(args: &ResizeArgs) -> AppResult<()> {
    let cfg_file = ConfigMap::load_opt(args.config.as_deref())?;
    cfg_file.ensure_known(&RESIZE_KEYS)?;

    let scale = args
        .scale
        .or(cfg_file.get("scale")?)
        .ok_or_else(|| usage("--scale is required"))?;
    if !scale.is_finite() || scale <= 0.0 {
        return Err(usage(format!("--scale must be positive, got {scale}")));
    }
    let antialias = args.antialias || cfg_file.get_flag("antialias")?;
    let out = args
        .out
        .clone()
        .or(cfg_file.get("out")?)
        .unwrap_or_else(|| derive_out(&args.input, "_resized"));

    let input = Image::load(&args.input)?;
    let out_h = scaled_dim(input.height(), scale);
    let out_w = scaled_dim(input.width(), scale);
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidInput(format!(
            "{}x{} image vanishes at scale {scale}",
            input.height(),
            input.width()
        ))
        .into());
    }
    let resized = resize_bicubic_scale(&input, scale, antialias);
    resized.save_png(&out)?;
    println!(
        "wrote {} ({}x{})",
        out.display(),
        resized.height(),
        resized.width()
    );
    Ok(())
}
