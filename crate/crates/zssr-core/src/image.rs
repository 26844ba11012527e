//! Image container, PNG I/O, luma conversion and the 8-element dihedral
//! transform group (4 rotations x optional mirror) used for augmentation
//! and the self-ensemble.

use std::path::Path;

use crate::error::{Error, Result};

/// Multi-channel raster with samples in `[0, 1]`, stored planar
/// (channel-major, row-major within each channel).
///
/// Values may leave `[0, 1]` transiently inside arithmetic (signed
/// residuals, bicubic overshoot); they are clamped at export boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    /// Validated constructor: dims >= 1, channels in {1, 3}, finite samples.
    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput("image dimensions must be >= 1".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "expected {} samples for {}x{}x{}, got {}",
                height * width * channels,
                height,
                width,
                channels,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("image contains non-finite samples".into()));
        }
        Ok(Self::raw(height, width, channels, data))
    }

    /// Internal constructor for data produced by our own arithmetic.
    pub(crate) fn raw(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Image {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self::raw(height, width, channels, vec![value; height * width * channels])
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::constant(height, width, channels, 0.0)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Smaller of height and width.
    pub fn min_dim(&self) -> usize {
        self.height.min(self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// One channel as a contiguous row-major slice.
    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// Axis-aligned sub-image. Panics if the window exceeds the bounds.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Image {
        assert!(y0 + h <= self.height && x0 + w <= self.width, "crop out of bounds");
        let mut data = Vec::with_capacity(h * w * self.channels);
        for c in 0..self.channels {
            let plane = self.plane(c);
            for y in y0..y0 + h {
                data.extend_from_slice(&plane[y * self.width + x0..y * self.width + x0 + w]);
            }
        }
        Image::raw(h, w, self.channels, data)
    }

    /// Clamp every sample to `[0, 1]` in place.
    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// BT.601 luma in the digital-video convention,
    /// `Y = (65.481 R + 128.553 G + 24.966 B + 16) / 255`.
    ///
    /// Single-channel input passes through unchanged.
    pub fn to_luma(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let n = self.height * self.width;
        let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            data.push((65.481 * r[i] + 128.553 * g[i] + 24.966 * b[i] + 16.0) / 255.0);
        }
        Image::raw(self.height, self.width, 1, data)
    }

    /// Decode a raster file. 8-bit and 16-bit gray/RGB are accepted; an
    /// alpha channel is dropped. Samples map to `[0, 1]` by division by
    /// the integer type's maximum.
    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        // Filesystem failures are io errors; any decode failure,
        // truncation included, counts as an unreadable image.
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode_bytes(&bytes, path)
    }

    /// Decode an in-memory encoded raster. `path` only labels errors.
    pub(crate) fn decode_bytes(bytes: &[u8], path: &Path) -> Result<Image> {
        let dynimg = ::image::load_from_memory(bytes).map_err(|e| Error::ImageDecode {
            path: path.into(),
            reason: format!("unreadable: {e}"),
        })?;

        use ::image::DynamicImage as D;
        let (h, w) = (dynimg.height() as usize, dynimg.width() as usize);
        let img = match dynimg {
            D::ImageLuma8(buf) => {
                let data = buf.into_raw().iter().map(|&v| v as f64 / 255.0).collect();
                Image::raw(h, w, 1, data)
            }
            D::ImageLumaA8(buf) => {
                let data = buf.into_raw().chunks_exact(2).map(|p| p[0] as f64 / 255.0).collect();
                Image::raw(h, w, 1, data)
            }
            D::ImageRgb8(buf) => Self::from_interleaved_u8(h, w, 3, &buf.into_raw(), 255.0),
            D::ImageRgba8(buf) => Self::from_interleaved_u8(h, w, 4, &buf.into_raw(), 255.0),
            D::ImageLuma16(buf) => {
                let data = buf.into_raw().iter().map(|&v| v as f64 / 65535.0).collect();
                Image::raw(h, w, 1, data)
            }
            D::ImageRgb16(buf) => Self::from_interleaved_u16(h, w, 3, &buf.into_raw()),
            D::ImageRgba16(buf) => Self::from_interleaved_u16(h, w, 4, &buf.into_raw()),
            other => {
                return Err(Error::UnsupportedImage {
                    path: path.into(),
                    reason: format!("unsupported pixel layout {:?}", other.color()),
                })
            }
        };
        Ok(img)
    }

    fn from_interleaved_u8(h: usize, w: usize, src_ch: usize, raw: &[u8], max: f64) -> Image {
        let n = h * w;
        let mut data = vec![0.0; n * 3];
        for c in 0..3 {
            for i in 0..n {
                data[c * n + i] = raw[i * src_ch + c] as f64 / max;
            }
        }
        Image::raw(h, w, 3, data)
    }

    fn from_interleaved_u16(h: usize, w: usize, src_ch: usize, raw: &[u16]) -> Image {
        let n = h * w;
        let mut data = vec![0.0; n * 3];
        for c in 0..3 {
            for i in 0..n {
                data[c * n + i] = raw[i * src_ch + c] as f64 / 65535.0;
            }
        }
        Image::raw(h, w, 3, data)
    }

    /// Clamp, quantize to 8 bits, and interleave; 1 channel stays gray,
    /// anything else comes out as RGB.
    pub(crate) fn to_interleaved_u8(&self) -> (Vec<u8>, usize) {
        let quantize = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let n = self.height * self.width;
        if self.channels == 1 {
            (self.data.iter().map(|&v| quantize(v)).collect(), 1)
        } else {
            let mut raw = vec![0u8; n * 3];
            for c in 0..3 {
                let plane = self.plane(c);
                for i in 0..n {
                    raw[i * 3 + c] = quantize(plane[i]);
                }
            }
            (raw, 3)
        }
    }

    /// Encode as 8-bit PNG (gray or RGB). Samples are clamped to `[0, 1]`
    /// and quantized to the nearest integer level.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let (raw, ch) = self.to_interleaved_u8();
        let color = if ch == 1 {
            ::image::ColorType::L8
        } else {
            ::image::ColorType::Rgb8
        };
        let result = ::image::save_buffer(
            path,
            &raw,
            self.width as u32,
            self.height as u32,
            color,
        );
        result.map_err(|e| match e {
            ::image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::ImageEncode {
                path: path.into(),
                reason: other.to_string(),
            },
        })
    }
}

/// Quarter-turn rotations, counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub fn quarter_turns(self) -> u8 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 1,
            Rotation::R180 => 2,
            Rotation::R270 => 3,
        }
    }

    pub fn from_quarter_turns(turns: u8) -> Rotation {
        match turns % 4 {
            0 => Rotation::R0,
            1 => Rotation::R90,
            2 => Rotation::R180,
            _ => Rotation::R270,
        }
    }
}

/// One element of the dihedral group D4: an optional horizontal mirror
/// followed by a counter-clockwise quarter-turn rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Geometry {
    pub rotation: Rotation,
    pub mirrored: bool,
}

impl Geometry {
    pub const IDENTITY: Geometry = Geometry {
        rotation: Rotation::R0,
        mirrored: false,
    };

    /// All 8 group elements in a fixed enumeration order: the four
    /// rotations unmirrored, then the four rotations mirrored.
    pub fn all() -> [Geometry; 8] {
        let mut out = [Geometry::IDENTITY; 8];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = Geometry {
                rotation: Rotation::from_quarter_turns((i % 4) as u8),
                mirrored: i >= 4,
            };
        }
        out
    }

    /// Group inverse. Reflections are involutions, so mirrored elements
    /// are their own inverse.
    pub fn inverse(self) -> Geometry {
        if self.mirrored {
            self
        } else {
            Geometry {
                rotation: Rotation::from_quarter_turns(4 - self.rotation.quarter_turns()),
                mirrored: false,
            }
        }
    }

    /// Whether applying this transform swaps height and width.
    pub fn swaps_dims(self) -> bool {
        matches!(self.rotation, Rotation::R90 | Rotation::R270)
    }

    /// The single geometry equivalent to applying `self` first and `next`
    /// after.
    pub fn then(self, next: Geometry) -> Geometry {
        let r1 = self.rotation.quarter_turns() as i8;
        let r2 = next.rotation.quarter_turns() as i8;
        let r = if next.mirrored { r2 - r1 } else { r2 + r1 };
        Geometry {
            rotation: Rotation::from_quarter_turns(r.rem_euclid(4) as u8),
            mirrored: self.mirrored ^ next.mirrored,
        }
    }
}

/// Apply a dihedral transform as an exact sample permutation. Rotations
/// by 90/270 degrees swap the spatial dimensions.
pub fn apply_geometry(img: &Image, g: Geometry) -> Image {
    let mirrored = if g.mirrored { mirror_h(img) } else { img.clone() };
    match g.rotation {
        Rotation::R0 => mirrored,
        Rotation::R90 => rot90(&mirrored),
        Rotation::R180 => rot180(&mirrored),
        Rotation::R270 => rot270(&mirrored),
    }
}

/// Flip columns: out[y][x] = in[y][w-1-x].
fn mirror_h(img: &Image) -> Image {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let mut data = Vec::with_capacity(h * w * ch);
    for c in 0..ch {
        let plane = img.plane(c);
        for y in 0..h {
            let row = &plane[y * w..(y + 1) * w];
            data.extend(row.iter().rev());
        }
    }
    Image::raw(h, w, ch, data)
}

/// Counter-clockwise quarter turn: out (w x h) with out[i][j] = in[j][w-1-i].
fn rot90(img: &Image) -> Image {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let mut data = Vec::with_capacity(h * w * ch);
    for c in 0..ch {
        let plane = img.plane(c);
        for i in 0..w {
            for j in 0..h {
                data.push(plane[j * w + (w - 1 - i)]);
            }
        }
    }
    Image::raw(w, h, ch, data)
}

fn rot180(img: &Image) -> Image {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let mut data = Vec::with_capacity(h * w * ch);
    for c in 0..ch {
        let plane = img.plane(c);
        data.extend(plane.iter().rev());
    }
    Image::raw(h, w, ch, data)
}

/// Clockwise quarter turn: out (w x h) with out[i][j] = in[h-1-j][i].
fn rot270(img: &Image) -> Image {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let mut data = Vec::with_capacity(h * w * ch);
    for c in 0..ch {
        let plane = img.plane(c);
        for i in 0..w {
            for j in 0..h {
                data.push(plane[(h - 1 - j) * w + i]);
            }
        }
    }
    Image::raw(w, h, ch, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize, ch: usize) -> Image {
        let n = h * w * ch;
        Image::raw(h, w, ch, (0..n).map(|i| i as f64 / n as f64).collect())
    }

    #[test]
    fn identity_geometry_is_noop() {
        let img = ramp(3, 5, 3);
        assert_eq!(apply_geometry(&img, Geometry::IDENTITY), img);
    }

    #[test]
    fn four_quarter_turns_return_original() {
        let img = ramp(3, 5, 1);
        let g = Geometry {
            rotation: Rotation::R90,
            mirrored: false,
        };
        let mut out = img.clone();
        for _ in 0..4 {
            out = apply_geometry(&out, g);
        }
        assert_eq!(out, img);
    }

    #[test]
    fn mirror_of_1x2_swaps_samples() {
        let img = Image::raw(1, 2, 1, vec![0.25, 0.75]);
        let g = Geometry {
            rotation: Rotation::R0,
            mirrored: true,
        };
        let out = apply_geometry(&img, g);
        assert_eq!(out.data(), &[0.75, 0.25]);
    }

    #[test]
    fn inverse_round_trip_is_bit_exact_for_all_8() {
        let img = ramp(4, 7, 3);
        for g in Geometry::all() {
            let there = apply_geometry(&img, g);
            let back = apply_geometry(&there, g.inverse());
            assert_eq!(back, img, "failed for {:?}", g);
        }
    }

    #[test]
    fn composition_law_matches_sequential_application() {
        let img = ramp(5, 3, 1);
        for a in Geometry::all() {
            for b in Geometry::all() {
                let sequential = apply_geometry(&apply_geometry(&img, a), b);
                let composed = apply_geometry(&img, a.then(b));
                assert_eq!(sequential, composed, "a={a:?} b={b:?}");
            }
        }
    }

    #[test]
    fn geometry_preserves_sample_multiset() {
        let img = ramp(6, 4, 3);
        for g in Geometry::all() {
            let out = apply_geometry(&img, g);
            let mut a: Vec<f64> = img.data().to_vec();
            let mut b: Vec<f64> = out.data().to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn luma_endpoints_match_digital_range() {
        let white = Image::constant(2, 2, 3, 1.0);
        let black = Image::constant(2, 2, 3, 0.0);
        let yw = white.to_luma();
        let yb = black.to_luma();
        for &v in yw.data() {
            assert!((v - 235.0 / 255.0).abs() < 1e-12);
        }
        for &v in yb.data() {
            assert!((v - 16.0 / 255.0).abs() < 1e-12);
        }
    }

    #[test]
    fn luma_pure_red() {
        let mut img = Image::zeros(1, 1, 3);
        img.set(0, 0, 0, 1.0);
        let y = img.to_luma();
        assert!((y.get(0, 0, 0) - (65.481 + 16.0) / 255.0).abs() < 1e-12);
    }

    #[test]
    fn luma_passthrough_for_gray() {
        let img = ramp(3, 3, 1);
        assert_eq!(img.to_luma(), img);
    }

    #[test]
    fn crop_extracts_window() {
        let img = ramp(4, 4, 1);
        let c = img.crop(1, 2, 2, 2);
        assert_eq!(c.height(), 2);
        assert_eq!(c.width(), 2);
        assert_eq!(c.get(0, 0, 0), img.get(0, 1, 2));
        assert_eq!(c.get(0, 1, 1), img.get(0, 2, 3));
    }

    #[test]
    fn from_vec_rejects_bad_shapes() {
        assert!(Image::from_vec(0, 4, 1, vec![]).is_err());
        assert!(Image::from_vec(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Image::from_vec(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Image::from_vec(1, 1, 1, vec![f64::NAN]).is_err());
    }
}
