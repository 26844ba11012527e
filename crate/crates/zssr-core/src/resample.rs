//! Resampling: bicubic resize with antialiasing matching the reference
//! `imresize` conventions (Keys cubic a = -0.5, half-pixel-center mapping,
//! support stretching on downscale, edge replication), generic
//! convolve-and-subsample downscaling with an explicit kernel, and random
//! anisotropic Gaussian kernel generation.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;

/// Variance floor applied to degenerate Gaussian axes so the covariance
/// stays invertible.
pub const GAUSSIAN_VARIANCE_FLOOR: f64 = 0.05;

/// Keys cubic interpolation weight with a = -0.5.
pub fn cubic_weight(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        (1.5 * a - 2.5) * a * a + 1.0
    } else if a <= 2.0 {
        ((-0.5 * a + 2.5) * a - 4.0) * a + 2.0
    } else {
        0.0
    }
}

/// Round half away from zero, the convention for all derived pixel
/// dimensions.
pub fn round_dim(x: f64) -> usize {
    x.round().max(0.0) as usize
}

/// Output size for scaling a dimension by `scale`.
pub fn scaled_dim(len: usize, scale: f64) -> usize {
    round_dim(len as f64 * scale)
}

/// 2-D convolution tap grid with a sub-pixel center anchor. Taps are
/// normalized to sum 1 on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    kh: usize,
    kw: usize,
    taps: Vec<f64>,
    center: (f64, f64),
}

impl Kernel {
    /// Build a kernel from row-major taps, normalizing them to sum 1.
    /// `center` defaults to the geometric middle ((kh-1)/2, (kw-1)/2).
    pub fn new(kh: usize, kw: usize, taps: Vec<f64>, center: Option<(f64, f64)>) -> Result<Kernel> {
        if kh == 0 || kw == 0 {
            return Err(Error::InvalidInput("kernel dimensions must be >= 1".into()));
        }
        if taps.len() != kh * kw {
            return Err(Error::ShapeMismatch(format!(
                "kernel {}x{} needs {} taps, got {}",
                kh,
                kw,
                kh * kw,
                taps.len()
            )));
        }
        if !taps.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidInput("kernel contains non-finite taps".into()));
        }
        let sum: f64 = taps.iter().sum();
        if sum.abs() < 1e-12 {
            return Err(Error::InvalidInput("kernel taps sum to zero, cannot normalize".into()));
        }
        let taps = taps.iter().map(|t| t / sum).collect();
        let center = center.unwrap_or(((kh as f64 - 1.0) / 2.0, (kw as f64 - 1.0) / 2.0));
        Ok(Kernel { kh, kw, taps, center })
    }

    /// Single-tap identity kernel (pure subsampling when used to
    /// downscale).
    pub fn delta() -> Kernel {
        Kernel::new(1, 1, vec![1.0], None).expect("delta kernel is valid")
    }

    pub fn height(&self) -> usize {
        self.kh
    }

    pub fn width(&self) -> usize {
        self.kw
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    #[inline]
    pub fn tap(&self, i: usize, j: usize) -> f64 {
        self.taps[i * self.kw + j]
    }

    fn default_center(&self) -> (f64, f64) {
        ((self.kh as f64 - 1.0) / 2.0, (self.kw as f64 - 1.0) / 2.0)
    }
}

/// Parameters of a random anisotropic Gaussian downscaling kernel: axis
/// variances, rotation angle and the SR scale factor they were drawn for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernelSpec {
    pub lambda1: f64,
    pub lambda2: f64,
    pub theta: f64,
    pub scale: f64,
}

impl GaussianKernelSpec {
    pub fn validate(&self) -> Result<()> {
        let s2 = self.scale * self.scale;
        if !(self.scale > 1.0) {
            return Err(Error::Config(format!("scale must be > 1, got {}", self.scale)));
        }
        if !(0.0..=s2).contains(&self.lambda1) || !(0.0..=s2).contains(&self.lambda2) {
            return Err(Error::Config(format!(
                "lambda1/lambda2 must lie in [0, {s2}], got {} and {}",
                self.lambda1, self.lambda2
            )));
        }
        if !(0.0..PI).contains(&self.theta) {
            return Err(Error::Config(format!(
                "theta must lie in [0, pi), got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// Discretize the anisotropic Gaussian with covariance U diag(l1, l2) U^t,
/// U the rotation by theta. The grid extends ceil(3 sigma_max) taps each
/// way from the center; variances are floored at 0.05 so the covariance
/// inverts even for degenerate draws.
pub fn gaussian_kernel(spec: &GaussianKernelSpec) -> Result<Kernel> {
    spec.validate()?;
    let l1 = spec.lambda1.max(GAUSSIAN_VARIANCE_FLOOR);
    let l2 = spec.lambda2.max(GAUSSIAN_VARIANCE_FLOOR);
    let radius = (3.0 * l1.max(l2).sqrt()).ceil() as usize;
    let size = 2 * radius + 1;

    // Sigma = U L U^t, so inv(Sigma) = U inv(L) U^t.
    let (sin, cos) = spec.theta.sin_cos();
    // inv(Sigma) entries, expanded for the 2x2 rotation.
    let a = cos * cos / l1 + sin * sin / l2;
    let b = sin * cos / l1 - sin * cos / l2;
    let d = sin * sin / l1 + cos * cos / l2;

    let mut taps = Vec::with_capacity(size * size);
    for i in 0..size {
        let dy = i as f64 - radius as f64;
        for j in 0..size {
            let dx = j as f64 - radius as f64;
            let quad = a * dy * dy + 2.0 * b * dy * dx + d * dx * dx;
            taps.push((-0.5 * quad).exp());
        }
    }
    Kernel::new(size, size, taps, None)
}

/// Draw a random Gaussian kernel for scale factor `s`: axis variances
/// uniform on [0, s^2], angle uniform on [0, pi). Deterministic for a
/// given seed.
pub fn sample_random_kernel(s: f64, seed: u64) -> Result<(Kernel, GaussianKernelSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_random_kernel_with(s, &mut rng)
}

/// As [`sample_random_kernel`] but drawing from a caller-supplied stream.
pub fn sample_random_kernel_with(
    s: f64,
    rng: &mut impl Rng,
) -> Result<(Kernel, GaussianKernelSpec)> {
    if !(s > 1.0) {
        return Err(Error::Config(format!("scale must be > 1, got {s}")));
    }
    let s2 = s * s;
    let spec = GaussianKernelSpec {
        lambda1: rng.random::<f64>() * s2,
        lambda2: rng.random::<f64>() * s2,
        theta: rng.random::<f64>() * PI,
        scale: s,
    };
    let kernel = gaussian_kernel(&spec)?;
    Ok((kernel, spec))
}

// ---------------------------------------------------------------------------
// Bicubic resize
// ---------------------------------------------------------------------------

/// Contribution of source samples to one output sample along one axis.
struct TapLine {
    start: isize,
    weights: Vec<f64>,
}

/// Per-output-index source taps for one axis, following the reference
/// conventions: source = (dest + 0.5)/scale - 0.5, kernel support
/// stretched by 1/scale with renormalization when shrinking with
/// antialiasing, indices clamped for edge replication.
fn resize_taps(in_len: usize, out_len: usize, antialias: bool) -> Vec<TapLine> {
    let scale = out_len as f64 / in_len as f64;
    let (kernel_scale, kernel_width) = if antialias && scale < 1.0 {
        (scale, 4.0 / scale)
    } else {
        (1.0, 4.0)
    };
    let tap_count = kernel_width.ceil() as usize + 2;

    let mut lines = Vec::with_capacity(out_len);
    for o in 0..out_len {
        let u = (o as f64 + 0.5) / scale - 0.5;
        let left = (u - kernel_width / 2.0).floor() as isize;
        let mut weights = Vec::with_capacity(tap_count);
        let mut sum = 0.0;
        for t in 0..tap_count {
            let idx = left + t as isize;
            let w = kernel_scale * cubic_weight(kernel_scale * (u - idx as f64));
            weights.push(w);
            sum += w;
        }
        for w in &mut weights {
            *w /= sum;
        }
        lines.push(TapLine { start: left, weights });
    }
    lines
}

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Resize one plane separably: height pass, then width pass. No clamping.
fn resize_plane(
    plane: &[f64],
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
    antialias: bool,
) -> Vec<f64> {
    // Height pass: (in_h x in_w) -> (out_h x in_w).
    let mid = if out_h == in_h {
        plane.to_vec()
    } else {
        let taps = resize_taps(in_h, out_h, antialias);
        let mut mid = vec![0.0; out_h * in_w];
        for (o, line) in taps.iter().enumerate() {
            let dst = &mut mid[o * in_w..(o + 1) * in_w];
            for (t, &w) in line.weights.iter().enumerate() {
                let src_row = clamp_index(line.start + t as isize, in_h);
                let src = &plane[src_row * in_w..(src_row + 1) * in_w];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        mid
    };

    // Width pass: (out_h x in_w) -> (out_h x out_w).
    if out_w == in_w {
        return mid;
    }
    let taps = resize_taps(in_w, out_w, antialias);
    let mut out = vec![0.0; out_h * out_w];
    for y in 0..out_h {
        let src = &mid[y * in_w..(y + 1) * in_w];
        let dst = &mut out[y * out_w..(y + 1) * out_w];
        for (o, line) in taps.iter().enumerate() {
            let mut acc = 0.0;
            for (t, &w) in line.weights.iter().enumerate() {
                acc += w * src[clamp_index(line.start + t as isize, in_w)];
            }
            dst[o] = acc;
        }
    }
    out
}

/// Separable bicubic resize to explicit output dimensions. Output is
/// clamped to `[0, 1]`. Antialiasing only affects shrinking.
pub fn resize_bicubic(img: &Image, out_h: usize, out_w: usize, antialias: bool) -> Image {
    let mut out = resize_bicubic_field(img, out_h, out_w, antialias);
    out.clamp_unit();
    out
}

/// As [`resize_bicubic`] but without the final clamp, for signed
/// correction fields.
pub(crate) fn resize_bicubic_field(
    img: &Image,
    out_h: usize,
    out_w: usize,
    antialias: bool,
) -> Image {
    assert!(out_h >= 1 && out_w >= 1, "output dimensions must be >= 1");
    let ch = img.channels();
    let mut data = Vec::with_capacity(out_h * out_w * ch);
    for c in 0..ch {
        data.extend(resize_plane(
            img.plane(c),
            img.height(),
            img.width(),
            out_h,
            out_w,
            antialias,
        ));
    }
    Image::raw(out_h, out_w, ch, data)
}

/// Resize by a uniform scale factor; output dims round half away from
/// zero.
pub fn resize_bicubic_scale(img: &Image, scale: f64, antialias: bool) -> Image {
    let out_h = scaled_dim(img.height(), scale).max(1);
    let out_w = scaled_dim(img.width(), scale).max(1);
    resize_bicubic(img, out_h, out_w, antialias)
}

// ---------------------------------------------------------------------------
// Kernel downscaling
// ---------------------------------------------------------------------------

/// Convolve with `k` (edge-replicate padding) and subsample by factor
/// `s > 1` using the half-pixel-center mapping; sample positions and the
/// kernel anchor are rounded half away from zero to the integer grid.
/// Output dims are round(in/s).
pub fn downscale_with_kernel(img: &Image, k: &Kernel, s: f64) -> Result<Image> {
    if !(s > 1.0) {
        return Err(Error::Config(format!("downscale factor must be > 1, got {s}")));
    }
    let out_h = round_dim(img.height() as f64 / s);
    let out_w = round_dim(img.width() as f64 / s);
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidInput(format!(
            "downscaling {}x{} by {} leaves no pixels",
            img.height(),
            img.width(),
            s
        )));
    }
    let mut out = downscale_with_kernel_to(img, k, s, out_h, out_w)?;
    out.clamp_unit();
    Ok(out)
}

/// Kernel downscale to explicit output dimensions; unclamped. Used where
/// the caller must control dim rounding (back-projection) or needs signed
/// values.
pub(crate) fn downscale_with_kernel_to(
    img: &Image,
    k: &Kernel,
    s: f64,
    out_h: usize,
    out_w: usize,
) -> Result<Image> {
    let (in_h, in_w) = (img.height(), img.width());
    if k.height() > 2 * in_h + 1 || k.width() > 2 * in_w + 1 {
        return Err(Error::InvalidInput(format!(
            "kernel {}x{} larger than padded {}x{} image",
            k.height(),
            k.width(),
            in_h,
            in_w
        )));
    }
    let cy = k.center().0.round() as isize;
    let cx = k.center().1.round() as isize;
    let ch = img.channels();
    let mut data = Vec::with_capacity(out_h * out_w * ch);
    for c in 0..ch {
        let plane = img.plane(c);
        for oy in 0..out_h {
            let ny = ((oy as f64 + 0.5) * s - 0.5).round() as isize;
            for ox in 0..out_w {
                let nx = ((ox as f64 + 0.5) * s - 0.5).round() as isize;
                let mut acc = 0.0;
                for i in 0..k.height() {
                    let sy = clamp_index(ny + i as isize - cy, in_h);
                    let row = &plane[sy * in_w..(sy + 1) * in_w];
                    for j in 0..k.width() {
                        let sx = clamp_index(nx + j as isize - cx, in_w);
                        acc += k.tap(i, j) * row[sx];
                    }
                }
                data.push(acc);
            }
        }
    }
    Ok(Image::raw(out_h, out_w, ch, data))
}

// ---------------------------------------------------------------------------
// Kernel file format
// ---------------------------------------------------------------------------

/// Read a kernel from the text format: first line "KH KW", then KH rows
/// of KW decimal floats, then optionally "CENTER r c". Lines starting
/// with '#' and blank lines are skipped. Taps are normalized to sum 1; a
/// deviation above 1e-3 from unit sum is logged as a warning.
pub fn load_kernel(path: impl AsRef<Path>) -> Result<Kernel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kernel(&text).map_err(|(line, reason)| Error::KernelFormat {
        path: path.into(),
        line,
        reason,
    })
}

fn parse_kernel(text: &str) -> std::result::Result<Kernel, (usize, String)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (first_no, first) = lines.next().ok_or((0, "empty kernel file".to_string()))?;
    let dims: Vec<&str> = first.split_whitespace().collect();
    if dims.len() != 2 {
        return Err((first_no, format!("expected \"KH KW\", got \"{first}\"")));
    }
    let kh: usize = dims[0]
        .parse()
        .map_err(|_| (first_no, format!("non-integer kernel height \"{}\"", dims[0])))?;
    let kw: usize = dims[1]
        .parse()
        .map_err(|_| (first_no, format!("non-integer kernel width \"{}\"", dims[1])))?;
    if kh == 0 || kw == 0 {
        return Err((first_no, format!("non-positive kernel size {kh}x{kw}")));
    }

    let mut taps = Vec::with_capacity(kh * kw);
    for _ in 0..kh {
        let (row_no, row) = lines
            .next()
            .ok_or((0, format!("expected {kh} tap rows, file ended early")))?;
        let values: Vec<&str> = row.split_whitespace().collect();
        if values.len() != kw {
            return Err((row_no, format!("expected {kw} taps, got {}", values.len())));
        }
        for v in values {
            let t: f64 = v
                .parse()
                .map_err(|_| (row_no, format!("non-numeric tap \"{v}\"")))?;
            taps.push(t);
        }
    }

    let mut center = None;
    if let Some((line_no, extra)) = lines.next() {
        let fields: Vec<&str> = extra.split_whitespace().collect();
        if fields.len() == 3 && fields[0].eq_ignore_ascii_case("CENTER") {
            let r: f64 = fields[1]
                .parse()
                .map_err(|_| (line_no, format!("non-numeric center row \"{}\"", fields[1])))?;
            let c: f64 = fields[2]
                .parse()
                .map_err(|_| (line_no, format!("non-numeric center col \"{}\"", fields[2])))?;
            center = Some((r, c));
        } else {
            return Err((line_no, format!("unexpected trailing line \"{extra}\"")));
        }
        if let Some((line_no, extra)) = lines.next() {
            return Err((line_no, format!("unexpected trailing line \"{extra}\"")));
        }
    }

    let sum: f64 = taps.iter().sum();
    if (sum - 1.0).abs() > 1e-3 {
        log::warn!("kernel taps sum to {sum}, normalizing to 1");
    }
    Kernel::new(kh, kw, taps, center).map_err(|e| (0, e.to_string()))
}

/// Write a kernel in the text format read by [`load_kernel`]. Taps print
/// with shortest round-trip formatting, so save/load preserves them
/// exactly.
pub fn save_kernel(k: &Kernel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = format!("{} {}\n", k.height(), k.width());
    for i in 0..k.height() {
        let row: Vec<String> = (0..k.width()).map(|j| format!("{}", k.tap(i, j))).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    if k.center() != k.default_center() {
        text.push_str(&format!("CENTER {} {}\n", k.center().0, k.center().1));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
