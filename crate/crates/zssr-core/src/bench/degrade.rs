//! Seeded low-resolution degradations for benchmark datasets.
//!
//! Every mode first shrinks the ground truth by the requested factor;
//! the quality degradations then corrupt that low-resolution image.
//! All randomness comes from ChaCha8 seeded per record, so a manifest
//! regenerates bit-identically.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::resample::{
    downscale_with_kernel, resize_bicubic, round_dim, sample_random_kernel, GaussianKernelSpec,
    Kernel,
};

/// Standard deviation of the additive Gaussian degradation.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.05;
/// Variance of the zero-mean uniform factor in the speckle degradation.
pub const DEFAULT_SPECKLE_VARIANCE: f64 = 0.05;
pub const DEFAULT_JPEG_QUALITY: u8 = 45;

/// Generator identity recorded with every degradation.
pub const RNG_ALGORITHM: &str = "chacha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DegradationMode {
    IdealBicubic,
    RandomGaussianKernel,
    DeltaAliasing,
    GaussianNoise,
    SpeckleNoise,
    Jpeg,
}

impl DegradationMode {
    pub const ALL: [DegradationMode; 6] = [
        DegradationMode::IdealBicubic,
        DegradationMode::RandomGaussianKernel,
        DegradationMode::DeltaAliasing,
        DegradationMode::GaussianNoise,
        DegradationMode::SpeckleNoise,
        DegradationMode::Jpeg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DegradationMode::IdealBicubic => "ideal-bicubic",
            DegradationMode::RandomGaussianKernel => "random-gaussian-kernel",
            DegradationMode::DeltaAliasing => "delta-aliasing",
            DegradationMode::GaussianNoise => "gaussian-noise",
            DegradationMode::SpeckleNoise => "speckle-noise",
            DegradationMode::Jpeg => "jpeg",
        }
    }
}

impl fmt::Display for DegradationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DegradationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DegradationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown degradation mode {s:?}")))
    }
}

/// Knobs for [`degrade`]. `noise_param` is a standard deviation for
/// Gaussian noise and a variance for speckle; unset fields fall back to
/// the mode's default.
#[derive(Debug, Clone)]
pub struct DegradeOptions {
    pub scale: f64,
    pub noise_param: Option<f64>,
    pub jpeg_quality: Option<u8>,
}

impl DegradeOptions {
    pub fn new(scale: f64) -> Self {
        DegradeOptions {
            scale,
            noise_param: None,
            jpeg_quality: None,
        }
    }
}

/// Everything needed to regenerate one degraded image. Only the fields
/// relevant to `mode` are populated.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationRecord {
    pub source: String,
    pub mode: DegradationMode,
    pub scale: f64,
    pub kernel_spec: Option<GaussianKernelSpec>,
    pub noise_param: Option<f64>,
    pub jpeg_quality: Option<u8>,
    pub codec: Option<String>,
    pub seed: u64,
    pub rng_algorithm: &'static str,
}

impl DegradationRecord {
    /// Semicolon-joined `key=value` list for the manifest params column.
    pub fn params_string(&self) -> String {
        let mut parts = vec![format!("scale={}", self.scale)];
        if let Some(spec) = &self.kernel_spec {
            parts.push(format!("lambda1={}", spec.lambda1));
            parts.push(format!("lambda2={}", spec.lambda2));
            parts.push(format!("theta={}", spec.theta));
        }
        if let Some(p) = self.noise_param {
            parts.push(format!("sigma={p}"));
        }
        if let Some(q) = self.jpeg_quality {
            parts.push(format!("quality={q}"));
        }
        if let Some(c) = &self.codec {
            parts.push(format!("codec={c}"));
        }
        parts.join(";")
    }
}

fn ideal_downscale(img: &Image, s: f64) -> Result<Image> {
    let out_h = round_dim(img.height() as f64 / s);
    let out_w = round_dim(img.width() as f64 / s);
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidInput(format!(
            "{}x{} image vanishes at scale {s}",
            img.height(),
            img.width()
        )));
    }
    Ok(resize_bicubic(img, out_h, out_w, true))
}

fn jpeg_roundtrip(img: &Image, quality: u8) -> Result<(Image, String)> {
    let (raw, ch) = img.to_interleaved_u8();
    let color = if ch == 1 {
        ::image::ExtendedColorType::L8
    } else {
        ::image::ExtendedColorType::Rgb8
    };
    let mut encoded = Vec::new();
    ::image::codecs::jpeg::JpegEncoder::new_with_quality(&mut encoded, quality)
        .encode(&raw, img.width() as u32, img.height() as u32, color)
        .map_err(|e| Error::CodecUnavailable(format!("image-rs jpeg encode: {e}")))?;
    let decoded = Image::decode_bytes(&encoded, Path::new("<jpeg roundtrip>"))
        .map_err(|e| Error::CodecUnavailable(format!("image-rs jpeg decode: {e}")))?;
    Ok((decoded, "image-rs jpeg".to_string()))
}

/// Produce the degraded low-resolution image plus its reproduction record.
/// The record's `source` is left empty for the caller to fill.
pub fn degrade(
    img: &Image,
    mode: DegradationMode,
    opts: &DegradeOptions,
    seed: u64,
) -> Result<(Image, DegradationRecord)> {
    let s = opts.scale;
    if !s.is_finite() || s <= 1.0 {
        return Err(Error::InvalidInput(format!(
            "degradation scale must exceed 1, got {s}"
        )));
    }
    let mut record = DegradationRecord {
        source: String::new(),
        mode,
        scale: s,
        kernel_spec: None,
        noise_param: None,
        jpeg_quality: None,
        codec: None,
        seed,
        rng_algorithm: RNG_ALGORITHM,
    };
    let out = match mode {
        DegradationMode::IdealBicubic => ideal_downscale(img, s)?,
        DegradationMode::RandomGaussianKernel => {
            let (kernel, spec) = sample_random_kernel(s, seed)?;
            record.kernel_spec = Some(spec);
            downscale_with_kernel(img, &kernel, s)?
        }
        DegradationMode::DeltaAliasing => downscale_with_kernel(img, &Kernel::delta(), s)?,
        DegradationMode::GaussianNoise => {
            let sigma = opts.noise_param.unwrap_or(DEFAULT_NOISE_SIGMA);
            if !sigma.is_finite() || sigma < 0.0 {
                return Err(Error::InvalidInput(format!("bad noise sigma {sigma}")));
            }
            record.noise_param = Some(sigma);
            let mut low = ideal_downscale(img, s)?;
            let normal = Normal::new(0.0, sigma)
                .map_err(|e| Error::InvalidInput(format!("bad noise sigma: {e}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for v in low.data_mut() {
                *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
            }
            low
        }
        DegradationMode::SpeckleNoise => {
            let variance = opts.noise_param.unwrap_or(DEFAULT_SPECKLE_VARIANCE);
            if !variance.is_finite() || variance < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "bad speckle variance {variance}"
                )));
            }
            record.noise_param = Some(variance);
            // Zero-mean uniform on [-a, a] has variance a^2/3.
            let half_width = (3.0 * variance).sqrt();
            let mut low = ideal_downscale(img, s)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for v in low.data_mut() {
                let n = (2.0 * rng.random::<f64>() - 1.0) * half_width;
                *v = (*v + *v * n).clamp(0.0, 1.0);
            }
            low
        }
        DegradationMode::Jpeg => {
            let quality = opts.jpeg_quality.unwrap_or(DEFAULT_JPEG_QUALITY);
            if quality == 0 || quality > 100 {
                return Err(Error::InvalidInput(format!(
                    "jpeg quality must be in 1..=100, got {quality}"
                )));
            }
            record.jpeg_quality = Some(quality);
            let low = ideal_downscale(img, s)?;
            let (coded, codec) = jpeg_roundtrip(&low, quality)?;
            record.codec = Some(codec);
            coded
        }
    };
    Ok((out, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(h: usize, w: usize) -> Image {
        let mut img = Image::zeros(h, w, 1);
        for y in 0..h {
            for x in 0..w {
                img.set(0, y, x, ((y + x) % 2) as f64);
            }
        }
        img
    }

    fn sample_stats(data: &[f64]) -> (f64, f64) {
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn ideal_bicubic_halves_dimensions() {
        let img = Image::constant(33, 41, 1, 0.5);
        let (low, record) = degrade(&img, DegradationMode::IdealBicubic, &DegradeOptions::new(2.0), 0)
            .unwrap();
        assert_eq!((low.height(), low.width()), (17, 21));
        assert_eq!(record.mode, DegradationMode::IdealBicubic);
    }

    #[test]
    fn records_hold_exactly_the_relevant_fields() {
        let img = Image::constant(32, 32, 1, 0.5);
        let opts = DegradeOptions::new(2.0);
        for mode in DegradationMode::ALL {
            let (_, r) = degrade(&img, mode, &opts, 7).unwrap();
            assert_eq!(r.kernel_spec.is_some(), mode == DegradationMode::RandomGaussianKernel);
            let noisy = matches!(
                mode,
                DegradationMode::GaussianNoise | DegradationMode::SpeckleNoise
            );
            assert_eq!(r.noise_param.is_some(), noisy);
            assert_eq!(r.jpeg_quality.is_some(), mode == DegradationMode::Jpeg);
            assert_eq!(r.codec.is_some(), mode == DegradationMode::Jpeg);
            assert_eq!(r.seed, 7);
            assert_eq!(r.rng_algorithm, "chacha8");
        }
    }

    #[test]
    fn gaussian_noise_std_matches_sigma() {
        // A million-pixel draw pins the sample deviation to within 1%.
        let img = Image::constant(2048, 2048, 1, 0.5);
        let (low, _) = degrade(&img, DegradationMode::GaussianNoise, &DegradeOptions::new(2.0), 3)
            .unwrap();
        assert!(low.data().len() >= 1_000_000);
        let (mean, std) = sample_stats(low.data());
        assert!((mean - 0.5).abs() < 1e-3, "mean {mean}");
        assert!((std - 0.05).abs() < 0.05 * 0.01, "std {std}");
    }

    #[test]
    fn speckle_scales_with_the_signal() {
        let img = Image::constant(2048, 2048, 1, 0.5);
        let (low, record) =
            degrade(&img, DegradationMode::SpeckleNoise, &DegradeOptions::new(2.0), 4).unwrap();
        // x + x*n with x = 0.5 and var(n) = 0.05.
        let expected = 0.5 * 0.05f64.sqrt();
        let (mean, std) = sample_stats(low.data());
        assert!((mean - 0.5).abs() < 1e-3, "mean {mean}");
        assert!((std - expected).abs() < expected * 0.01, "std {std}");
        assert_eq!(record.noise_param, Some(0.05));
    }

    #[test]
    fn delta_aliasing_collapses_a_period_two_checkerboard() {
        let img = checkerboard(32, 32);
        let (low, _) =
            degrade(&img, DegradationMode::DeltaAliasing, &DegradeOptions::new(2.0), 0).unwrap();
        assert_eq!((low.height(), low.width()), (16, 16));
        let first = low.data()[0];
        assert!(low.data().iter().all(|&v| v == first));
    }

    #[test]
    fn jpeg_roundtrips_lossily() {
        let mut img = Image::zeros(64, 64, 3);
        for c in 0..3 {
            for y in 0..64 {
                for x in 0..64 {
                    img.set(c, y, x, (y + x + 20 * c) as f64 / 190.0);
                }
            }
        }
        let (low, record) =
            degrade(&img, DegradationMode::Jpeg, &DegradeOptions::new(2.0), 0).unwrap();
        assert_eq!((low.height(), low.width(), low.channels()), (32, 32, 3));
        assert_eq!(record.jpeg_quality, Some(45));
        assert!(record.codec.as_deref().unwrap().contains("jpeg"));
        let clean = ideal_downscale(&img, 2.0).unwrap();
        let diff: f64 = low
            .data()
            .iter()
            .zip(clean.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / clean.data().len() as f64;
        assert!(diff > 0.0, "lossless roundtrip is suspicious");
        assert!(diff < 0.1, "mean deviation {diff}");
    }

    #[test]
    fn jpeg_keeps_gray_images_gray() {
        let img = Image::constant(32, 32, 1, 0.4);
        let (low, _) = degrade(&img, DegradationMode::Jpeg, &DegradeOptions::new(2.0), 0).unwrap();
        assert_eq!(low.channels(), 1);
    }

    #[test]
    fn same_seed_reproduces_bit_identically() {
        let img = Image::constant(64, 64, 1, 0.5);
        let opts = DegradeOptions::new(2.0);
        let (a, ra) = degrade(&img, DegradationMode::GaussianNoise, &opts, 9).unwrap();
        let (b, rb) = degrade(&img, DegradationMode::GaussianNoise, &opts, 9).unwrap();
        assert_eq!(a.data(), b.data());
        assert_eq!(ra, rb);
        let (c, _) = degrade(&img, DegradationMode::GaussianNoise, &opts, 10).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn scale_must_exceed_one() {
        let img = Image::constant(16, 16, 1, 0.5);
        assert!(degrade(&img, DegradationMode::IdealBicubic, &DegradeOptions::new(1.0), 0).is_err());
        assert!(degrade(&img, DegradationMode::IdealBicubic, &DegradeOptions::new(0.5), 0).is_err());
    }

    #[test]
    fn mode_names_round_trip() {
        for mode in DegradationMode::ALL {
            assert_eq!(mode.as_str().parse::<DegradationMode>().unwrap(), mode);
        }
        assert!("sepia".parse::<DegradationMode>().is_err());
    }

    #[test]
    fn params_string_carries_the_kernel_spec() {
        let img = Image::constant(32, 32, 1, 0.5);
        let (_, r) = degrade(
            &img,
            DegradationMode::RandomGaussianKernel,
            &DegradeOptions::new(2.0),
            11,
        )
        .unwrap();
        let p = r.params_string();
        assert!(p.starts_with("scale=2"), "{p}");
        assert!(p.contains("lambda1=") && p.contains("theta="), "{p}");
    }
}
