//! The image-specific training set: a ladder of downscaled versions of
//! the base image (plus earlier gradual outputs) serving as HR fathers,
//! and the sampler that turns one father into an aligned
//! (input, target) crop pair.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::{apply_geometry, Geometry, Image};
use crate::resample::{resize_bicubic, round_dim};
use crate::zssr::ZssrConfig;

/// Fathers shrink geometrically by this ratio per rung.
pub const POOL_RATIO: f64 = 0.95;
/// A father is kept only while its LR son would still have at least this
/// many pixels along the short side.
pub const MIN_SON_DIM: f64 = 16.0;
/// Hard cap on pool entries.
pub const MAX_POOL: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Original,
    Downscaled,
    SynthesizedHr,
}

#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub image: Image,
    pub ratio: f64,
    pub provenance: Provenance,
}

/// HR fathers sorted by descending size ratio; the first entry is the
/// current base image at ratio 1.
#[derive(Debug, Clone)]
pub struct FatherPool {
    entries: Vec<PoolEntry>,
}

impl FatherPool {
    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One training example: the LR son upscaled back to father size, the
/// father itself, and the dihedral transform that was applied.
#[derive(Debug, Clone)]
pub struct TrainPair {
    pub input: Image,
    pub target: Image,
    pub geometry: Geometry,
}

fn son_viable(min_dim: usize, step_factor: f64) -> bool {
    min_dim as f64 / step_factor >= MIN_SON_DIM
}

/// Pool for one gradual step: `base` at ratio 1, its 0.95^k downscales,
/// then `extras` (earlier chain images with their size ratios relative
/// to the base). Extras too small to yield a viable son are skipped.
pub(crate) fn build_pool(
    base: &Image,
    extras: &[(Image, f64)],
    cfg: &ZssrConfig,
) -> Result<FatherPool> {
    let f = cfg.step_factor();
    if !son_viable(base.min_dim(), f) {
        return Err(Error::InvalidInput(format!(
            "image {}x{} too small to train at factor {}: an LR son needs a short side of at least {} px",
            base.height(),
            base.width(),
            cfg.scale_factor,
            MIN_SON_DIM
        )));
    }

    let usable_extras: Vec<&(Image, f64)> = extras
        .iter()
        .filter(|(img, _)| son_viable(img.min_dim(), f))
        .collect();
    let ladder_budget = MAX_POOL - 1 - usable_extras.len().min(MAX_POOL - 1);

    let mut entries = vec![PoolEntry {
        image: base.clone(),
        ratio: 1.0,
        provenance: Provenance::Original,
    }];
    for k in 1..=ladder_budget {
        let ratio = POOL_RATIO.powi(k as i32);
        let h = round_dim(base.height() as f64 * ratio).max(1);
        let w = round_dim(base.width() as f64 * ratio).max(1);
        if !son_viable(h.min(w), f) {
            break;
        }
        entries.push(PoolEntry {
            image: resize_bicubic(base, h, w, true),
            ratio,
            provenance: Provenance::Downscaled,
        });
    }
    for (img, ratio) in usable_extras {
        entries.push(PoolEntry {
            image: img.clone(),
            ratio: *ratio,
            provenance: Provenance::SynthesizedHr,
        });
    }
    entries.sort_by(|a, b| b.ratio.partial_cmp(&a.ratio).unwrap());
    Ok(FatherPool { entries })
}

/// First-step pool: the input image and its geometric downscale ladder.
pub fn build_father_pool(input: &Image, cfg: &ZssrConfig) -> Result<FatherPool> {
    cfg.validate()?;
    build_pool(input, &[], cfg)
}

/// Selection probabilities, proportional to ratio^2 (father pixel
/// count).
pub fn sampling_weights(pool: &FatherPool) -> Vec<f64> {
    let raw: Vec<f64> = pool.entries.iter().map(|e| e.ratio * e.ratio).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn pick_father<'p>(pool: &'p FatherPool, rng: &mut impl Rng) -> &'p PoolEntry {
    let weights = sampling_weights(pool);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (entry, w) in pool.entries.iter().zip(&weights) {
        acc += w;
        if u < acc {
            return entry;
        }
    }
    pool.entries.last().unwrap()
}

/// Downscale a (transformed) father into its LR son, adding clamped
/// Gaussian noise when configured. Noise goes only on the son; the
/// father stays clean.
pub(crate) fn make_son(father: &Image, cfg: &ZssrConfig, rng: &mut impl Rng) -> Result<Image> {
    let mut son = cfg.downscaler.downscale(father, cfg.step_factor())?;
    if cfg.inject_noise && cfg.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma).expect("sigma validated non-negative");
        for v in son.data_mut() {
            *v = (*v + normal.sample(rng)).clamp(0.0, 1.0);
        }
    }
    Ok(son)
}

/// Sample one training pair: weighted father choice, a random dihedral
/// transform, son synthesis, bicubic re-upscale, and an aligned random
/// crop (the full image when it is smaller than the crop size).
pub fn draw_train_pair(
    pool: &FatherPool,
    cfg: &ZssrConfig,
    rng: &mut impl Rng,
) -> Result<TrainPair> {
    if pool.is_empty() {
        return Err(Error::InvalidInput("empty father pool".into()));
    }
    let entry = pick_father(pool, rng);
    let geometry = Geometry::all()[rng.random_range(0..8usize)];
    let father = apply_geometry(&entry.image, geometry);
    let son = make_son(&father, cfg, rng)?;
    let input_full = resize_bicubic(&son, father.height(), father.width(), true);

    let ch = cfg.crop_size.min(father.height());
    let cw = cfg.crop_size.min(father.width());
    let oy = rng.random_range(0..=father.height() - ch);
    let ox = rng.random_range(0..=father.width() - cw);
    Ok(TrainPair {
        input: input_full.crop(oy, ox, ch, cw),
        target: father.crop(oy, ox, ch, cw),
        geometry,
    })
}
