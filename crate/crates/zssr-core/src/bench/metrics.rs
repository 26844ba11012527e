//! Y-channel PSNR and SSIM plus the pixel-wise oracle combiner.
//!
//! Both metrics convert to BT.601 luma, shave a border, and score on the
//! remaining plane. PSNR of identical inputs is reported as infinity.

use crate::error::{Error, Result};
use crate::image::Image;

/// Side of the SSIM window.
pub const SSIM_WINDOW: usize = 11;
/// Standard deviation of the SSIM window.
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
/// Dynamic range of the luma plane.
const SSIM_L: f64 = 1.0;

/// One line of a score table.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub image: String,
    pub method: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

fn check_same_dims(a: &Image, b: &Image) -> Result<()> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::ShapeMismatch(format!(
            "metric inputs differ: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    Ok(())
}

fn shaved_luma(img: &Image, shave: usize) -> Result<Image> {
    let y = img.to_luma();
    if y.height() <= 2 * shave || y.width() <= 2 * shave {
        return Err(Error::InvalidInput(format!(
            "shave {} leaves nothing of a {}x{} image",
            shave,
            y.height(),
            y.width()
        )));
    }
    Ok(y.crop(shave, shave, y.height() - 2 * shave, y.width() - 2 * shave))
}

/// Pairwise reduction; keeps long sums accurate.
fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    pairwise_sum(v) / v.len() as f64
}

/// Peak signal-to-noise ratio in dB on the luma plane after shaving a
/// `shave`-wide border from every side. Identical planes give infinity.
pub fn psnr_y(sr: &Image, gt: &Image, shave: usize) -> Result<f64> {
    check_same_dims(sr, gt)?;
    let a = shaved_luma(sr, shave)?;
    let b = shaved_luma(gt, shave)?;
    let sq: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .collect();
    let mse = mean(&sq);
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Normalized 1-D Gaussian; the 2-D window is its outer product.
fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    for v in &mut w {
        *v /= s;
    }
    w
}

/// Separable valid-mode filtering; output is (h-10) x (w-10).
fn window_filter_valid(plane: &[f64], h: usize, w: usize, win: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let oh = h - (SSIM_WINDOW - 1);
    let ow = w - (SSIM_WINDOW - 1);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, &wk) in win.iter().enumerate() {
                acc += wk * row[x + k];
            }
            tmp[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, &wk) in win.iter().enumerate() {
                acc += wk * tmp[(y + k) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Single-scale SSIM on the luma plane: 11x11 Gaussian window, sigma 1.5,
/// K1 = 0.01, K2 = 0.03, unit dynamic range, averaged over valid window
/// positions after shaving.
pub fn ssim_y(sr: &Image, gt: &Image, shave: usize) -> Result<f64> {
    check_same_dims(sr, gt)?;
    let x = shaved_luma(sr, shave)?;
    let y = shaved_luma(gt, shave)?;
    let (h, w) = (x.height(), x.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidInput(format!(
            "ssim needs {SSIM_WINDOW}x{SSIM_WINDOW} pixels after shaving, got {h}x{w}"
        )));
    }
    let win = gaussian_window();
    let xp = x.plane(0);
    let yp = y.plane(0);
    let xx: Vec<f64> = xp.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = yp.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = xp.iter().zip(yp).map(|(a, b)| a * b).collect();
    let mx = window_filter_valid(xp, h, w, &win);
    let my = window_filter_valid(yp, h, w, &win);
    let sxx = window_filter_valid(&xx, h, w, &win);
    let syy = window_filter_valid(&yy, h, w, &win);
    let sxy = window_filter_valid(&xy, h, w, &win);

    let c1 = (SSIM_K1 * SSIM_L) * (SSIM_K1 * SSIM_L);
    let c2 = (SSIM_K2 * SSIM_L) * (SSIM_K2 * SSIM_L);
    let vals: Vec<f64> = (0..mx.len())
        .map(|i| {
            let (mu_x, mu_y) = (mx[i], my[i]);
            let var_x = sxx[i] - mu_x * mu_x;
            let var_y = syy[i] - mu_y * mu_y;
            let cov = sxy[i] - mu_x * mu_y;
            let num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2);
            let den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2);
            num / den
        })
        .collect();
    Ok(mean(&vals))
}

/// Per-pixel best-of-two composite: each pixel comes from whichever of
/// `a`/`b` has the smaller absolute luma error against `gt`, ties going
/// to `a`. Scores the composite with no border shave.
pub fn oracle_combine(a: &Image, b: &Image, gt: &Image) -> Result<(Image, ScoreRow)> {
    check_same_dims(a, b)?;
    check_same_dims(a, gt)?;
    if a.channels() != b.channels() || a.channels() != gt.channels() {
        return Err(Error::ShapeMismatch(format!(
            "combiner inputs differ in channels: {} vs {} vs {}",
            a.channels(),
            b.channels(),
            gt.channels()
        )));
    }
    let la = a.to_luma();
    let lb = b.to_luma();
    let lg = gt.to_luma();
    let mut out = a.clone();
    let n = a.height() * a.width();
    for i in 0..n {
        let ea = (la.data()[i] - lg.data()[i]).abs();
        let eb = (lb.data()[i] - lg.data()[i]).abs();
        if eb < ea {
            for c in 0..a.channels() {
                out.plane_mut(c)[i] = b.plane(c)[i];
            }
        }
    }
    let psnr_db = psnr_y(&out, gt, 0)?;
    let ssim = ssim_y(&out, gt, 0)?;
    let row = ScoreRow {
        image: String::new(),
        method: "oracle".into(),
        psnr_db,
        ssim,
    };
    Ok((out, row))
}
