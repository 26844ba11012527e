//! Manifest-driven evaluation: degrade, super-resolve, score.

use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::resample::{resize_bicubic, sample_random_kernel, Kernel};
use crate::zssr::{run_gradual, Downscaler, ZssrConfig};

use super::degrade::{degrade, DegradationMode, DegradeOptions};
use super::manifest::{param_value, parse_params, read_manifest, write_scores, ManifestRow};
use super::metrics::{psnr_y, ssim_y, ScoreRow};

/// Super-resolution variants the suite can run on top of the always-on
/// bicubic baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZssrVariant {
    /// Train and back-project under the reference bicubic kernel.
    AssumedBicubic,
    /// Use the degradation's own kernel where the mode defines one.
    TrueKernel,
    /// Assumed bicubic kernel plus noise injection on the training sons.
    NoiseInjection,
}

impl ZssrVariant {
    pub fn label(self) -> &'static str {
        match self {
            ZssrVariant::AssumedBicubic => "zssr",
            ZssrVariant::TrueKernel => "zssr-true-kernel",
            ZssrVariant::NoiseInjection => "zssr-noise",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub variants: Vec<ZssrVariant>,
    /// Template for every run; scale, kernel and noise flags are
    /// overridden per row and per variant.
    pub zssr: ZssrConfig,
    /// Border shave for scoring; the scale factor rounded up when unset.
    pub shave: Option<usize>,
}

impl SuiteConfig {
    pub fn new(zssr: ZssrConfig) -> Self {
        SuiteConfig {
            variants: vec![ZssrVariant::AssumedBicubic],
            zssr,
            shave: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteFailure {
    pub image: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    /// Per-image rows in manifest order, then one mean row per method.
    pub scores: Vec<ScoreRow>,
    pub failures: Vec<SuiteFailure>,
}

/// The kernel that actually produced a row's low-resolution image.
fn true_downscaler(row: &ManifestRow, scale: f64) -> Result<Downscaler> {
    Ok(match row.mode {
        DegradationMode::RandomGaussianKernel => {
            let (kernel, _) = sample_random_kernel(scale, row.seed)?;
            Downscaler::Kernel(kernel)
        }
        DegradationMode::DeltaAliasing => Downscaler::Kernel(Kernel::delta()),
        _ => Downscaler::Bicubic,
    })
}

/// Snap to the 8-bit grid. Scores follow the save-then-evaluate
/// convention of the usual benchmark scripts, so every image entering a
/// metric looks exactly like its PNG on disk.
fn quantize_unit(mut img: Image) -> Image {
    for v in img.data_mut() {
        *v = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
    }
    img
}

/// Nudge an output onto the ground-truth grid when rounding left the
/// dimensions one pixel apart.
fn fit_to(img: Image, h: usize, w: usize) -> Image {
    if img.height() == h && img.width() == w {
        img
    } else {
        warn!(
            "resizing {}x{} output to the {}x{} ground truth",
            img.height(),
            img.width(),
            h,
            w
        );
        resize_bicubic(&img, h, w, true)
    }
}

fn push_score(
    scores: &mut Vec<ScoreRow>,
    image: &str,
    method: &str,
    sr: &Image,
    gt: &Image,
    shave: usize,
) -> Result<()> {
    let psnr_db = psnr_y(sr, gt, shave)?;
    let ssim = ssim_y(sr, gt, shave)?;
    scores.push(ScoreRow {
        image: image.into(),
        method: method.into(),
        psnr_db,
        ssim,
    });
    Ok(())
}

fn eval_row(row: &ManifestRow, cfg: &SuiteConfig, scores: &mut Vec<ScoreRow>) -> Result<()> {
    let gt = Image::load(&row.gt_path)?;
    let params = parse_params(&row.params);
    let scale = match param_value(&params, "scale") {
        Some(v) => v
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad scale {v:?} for {}", row.image)))?,
        None => cfg.zssr.scale_factor,
    };
    let mut opts = DegradeOptions::new(scale);
    if let Some(v) = param_value(&params, "sigma") {
        opts.noise_param = Some(v.parse().map_err(|_| {
            Error::InvalidInput(format!("bad sigma {v:?} for {}", row.image))
        })?);
    }
    if let Some(v) = param_value(&params, "quality") {
        opts.jpeg_quality = Some(v.parse().map_err(|_| {
            Error::InvalidInput(format!("bad quality {v:?} for {}", row.image))
        })?);
    }

    // A pre-degraded file wins over regeneration when the manifest names one.
    let lr = quantize_unit(match param_value(&params, "lr") {
        Some(p) => Image::load(p)?,
        None => degrade(&gt, row.mode, &opts, row.seed)?.0,
    });

    let shave = cfg.shave.unwrap_or_else(|| scale.ceil() as usize);

    let baseline = quantize_unit(resize_bicubic(&lr, gt.height(), gt.width(), true));
    push_score(scores, &row.image, "bicubic", &baseline, &gt, shave)?;

    for &variant in &cfg.variants {
        let mut zcfg = cfg.zssr.clone();
        zcfg.scale_factor = scale;
        zcfg.downscaler = match variant {
            ZssrVariant::TrueKernel => true_downscaler(row, scale)?,
            _ => Downscaler::Bicubic,
        };
        if variant == ZssrVariant::NoiseInjection {
            zcfg.inject_noise = true;
        }
        let sr = quantize_unit(fit_to(run_gradual(&lr, &zcfg)?, gt.height(), gt.width()));
        push_score(scores, &row.image, variant.label(), &sr, &gt, shave)?;
    }
    Ok(())
}

fn append_mean_rows(scores: &mut Vec<ScoreRow>) {
    let mut methods: Vec<String> = Vec::new();
    for row in scores.iter() {
        if !methods.contains(&row.method) {
            methods.push(row.method.clone());
        }
    }
    let mut means = Vec::with_capacity(methods.len());
    for method in methods {
        let rows: Vec<&ScoreRow> = scores.iter().filter(|r| r.method == method).collect();
        let n = rows.len() as f64;
        means.push(ScoreRow {
            image: "mean".into(),
            method,
            psnr_db: rows.iter().map(|r| r.psnr_db).sum::<f64>() / n,
            ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        });
    }
    scores.extend(means);
}

/// Evaluate every manifest row, skipping over per-image failures so one
/// bad file cannot sink the table.
pub fn run_suite(rows: &[ManifestRow], cfg: &SuiteConfig) -> SuiteOutcome {
    if rows.is_empty() {
        warn!("empty manifest, nothing to evaluate");
    }
    let mut scores = Vec::new();
    let mut failures = Vec::new();
    for row in rows {
        if let Err(e) = eval_row(row, cfg, &mut scores) {
            warn!("{}: {e}", row.image);
            failures.push(SuiteFailure {
                image: row.image.clone(),
                reason: e.to_string(),
            });
        }
    }
    append_mean_rows(&mut scores);
    SuiteOutcome { scores, failures }
}

/// Write the failure manifest: CSV `image,reason`.
pub fn write_failures(path: impl AsRef<Path>, failures: &[SuiteFailure]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Manifest {
        path: path.into(),
        record: 0,
        reason: e.to_string(),
    })?;
    writer
        .write_record(["image", "reason"])
        .and_then(|()| {
            failures
                .iter()
                .try_for_each(|f| writer.write_record([f.image.as_str(), f.reason.as_str()]))
        })
        .and_then(|()| writer.flush().map_err(csv::Error::from))
        .map_err(|e| Error::Manifest {
            path: path.into(),
            record: 0,
            reason: e.to_string(),
        })
}

/// File-level driver: read the manifest, evaluate, write the score table,
/// and, if anything failed, a failure manifest beside it.
pub fn run_suite_to_files(
    manifest_path: impl AsRef<Path>,
    cfg: &SuiteConfig,
    scores_path: impl AsRef<Path>,
    failures_path: Option<&Path>,
) -> Result<SuiteOutcome> {
    let rows = read_manifest(manifest_path)?;
    let outcome = run_suite(&rows, cfg);
    write_scores(scores_path, &outcome.scores)?;
    if let Some(fp) = failures_path {
        if !outcome.failures.is_empty() {
            write_failures(fp, &outcome.failures)?;
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::manifest::write_manifest;

    fn tiny_zssr() -> ZssrConfig {
        ZssrConfig {
            gradual_steps: 1,
            crop_size: 16,
            max_iterations: 4,
            hidden_layers: 1,
            channels: 4,
            ..ZssrConfig::default()
        }
    }

    fn texture_png(dir: &Path, name: &str, h: usize, w: usize) -> (String, Image) {
        let mut state = 42u64;
        let mut img = Image::zeros(h, w, 1);
        for v in img.data_mut() {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            // Smooth-ish values so PNG quantization is the only loss.
            *v = ((state >> 11) as f64 / (1u64 << 53) as f64 * 255.0).round() / 255.0;
        }
        let path = dir.join(name);
        img.save_png(&path).unwrap();
        (path.to_string_lossy().into_owned(), Image::load(&path).unwrap())
    }

    #[test]
    fn empty_manifest_gives_an_empty_table() {
        let outcome = run_suite(&[], &SuiteConfig::new(tiny_zssr()));
        assert!(outcome.scores.is_empty());
        assert!(outcome.failures.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let scores = dir.path().join("scores.csv");
        write_scores(&scores, &outcome.scores).unwrap();
        assert_eq!(
            std::fs::read_to_string(&scores).unwrap(),
            "image,method,psnr_db,ssim\n"
        );
    }

    #[test]
    fn missing_files_land_in_the_failure_list() {
        let dir = tempfile::tempdir().unwrap();
        let (gt_path, _) = texture_png(dir.path(), "ok.png", 48, 48);
        let rows = vec![
            ManifestRow {
                image: "ghost".into(),
                gt_path: dir.path().join("ghost.png").to_string_lossy().into_owned(),
                mode: DegradationMode::IdealBicubic,
                seed: 0,
                params: "scale=2".into(),
            },
            ManifestRow {
                image: "ok".into(),
                gt_path,
                mode: DegradationMode::IdealBicubic,
                seed: 0,
                params: "scale=2".into(),
            },
        ];
        let mut cfg = SuiteConfig::new(tiny_zssr());
        cfg.variants.clear();
        let outcome = run_suite(&rows, &cfg);
        assert_eq!(outcome.failures.len(), 1);
        assert_eq!(outcome.failures[0].image, "ghost");
        // The good row still scored: its bicubic row plus the mean row.
        assert_eq!(outcome.scores.len(), 2);
        assert_eq!(outcome.scores[0].image, "ok");
        assert_eq!(outcome.scores[1].image, "mean");
    }

    #[test]
    fn baseline_row_matches_a_standalone_computation() {
        let dir = tempfile::tempdir().unwrap();
        let (gt_path, gt) = texture_png(dir.path(), "gt.png", 48, 48);
        let rows = vec![ManifestRow {
            image: "gt".into(),
            gt_path,
            mode: DegradationMode::IdealBicubic,
            seed: 5,
            params: "scale=2".into(),
        }];
        let mut cfg = SuiteConfig::new(tiny_zssr());
        cfg.variants.clear();
        let outcome = run_suite(&rows, &cfg);
        assert!(outcome.failures.is_empty());

        let (lr, _) = degrade(
            &gt,
            DegradationMode::IdealBicubic,
            &DegradeOptions::new(2.0),
            5,
        )
        .unwrap();
        let up = quantize_unit(resize_bicubic(&quantize_unit(lr), 48, 48, true));
        let expected = psnr_y(&up, &gt, 2).unwrap();
        assert_eq!(outcome.scores[0].method, "bicubic");
        assert_eq!(outcome.scores[0].psnr_db, expected);
    }

    #[test]
    fn constant_image_scores_infinite_psnr_everywhere() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.png");
        Image::constant(64, 64, 1, 0.5).save_png(&path).unwrap();
        let rows = vec![ManifestRow {
            image: "flat".into(),
            gt_path: path.to_string_lossy().into_owned(),
            mode: DegradationMode::IdealBicubic,
            seed: 0,
            params: "scale=2".into(),
        }];
        let cfg = SuiteConfig::new(tiny_zssr());
        let outcome = run_suite(&rows, &cfg);
        assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);
        assert_eq!(outcome.scores.len(), 4);
        for row in &outcome.scores {
            assert!(row.psnr_db.is_infinite(), "{row:?}");
            assert_eq!(row.ssim, 1.0, "{row:?}");
        }
    }

    #[test]
    fn true_kernel_variant_runs_under_its_label() {
        let dir = tempfile::tempdir().unwrap();
        let (gt_path, _) = texture_png(dir.path(), "gt.png", 64, 64);
        let rows = vec![ManifestRow {
            image: "gt".into(),
            gt_path,
            mode: DegradationMode::DeltaAliasing,
            seed: 1,
            params: "scale=2".into(),
        }];
        let mut cfg = SuiteConfig::new(tiny_zssr());
        cfg.variants = vec![ZssrVariant::TrueKernel];
        let outcome = run_suite(&rows, &cfg);
        assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);
        let labels: Vec<&str> = outcome
            .scores
            .iter()
            .map(|r| r.method.as_str())
            .collect();
        assert_eq!(
            labels,
            ["bicubic", "zssr-true-kernel", "bicubic", "zssr-true-kernel"]
        );
    }

    #[test]
    fn suite_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (gt_path, _) = texture_png(dir.path(), "gt.png", 48, 48);
        let manifest = dir.path().join("manifest.csv");
        write_manifest(
            &manifest,
            &[ManifestRow {
                image: "gt".into(),
                gt_path,
                mode: DegradationMode::GaussianNoise,
                seed: 2,
                params: "scale=2;sigma=0.02".into(),
            }],
        )
        .unwrap();
        let mut cfg = SuiteConfig::new(tiny_zssr());
        cfg.variants.clear();
        let scores = dir.path().join("scores.csv");
        let failures = dir.path().join("failures.csv");
        let outcome =
            run_suite_to_files(&manifest, &cfg, &scores, Some(failures.as_path())).unwrap();
        assert!(outcome.failures.is_empty());
        let text = std::fs::read_to_string(&scores).unwrap();
        assert!(text.starts_with("image,method,psnr_db,ssim\ngt,bicubic,"), "{text}");
        assert!(!failures.exists());
    }
}
