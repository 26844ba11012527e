//! Test-time training orchestration: build an image-specific training
//! set from the input itself, train the residual network under the
//! plateau-driven learning-rate schedule, optionally climb a gradual
//! scale ladder, and emit the final output through the geometric
//! self-ensemble with back-projection.

pub mod pool;
pub mod report;
pub mod schedule;
pub mod session;

pub use pool::{
    build_father_pool, draw_train_pair, sampling_weights, FatherPool, PoolEntry, Provenance,
    TrainPair,
};
pub use report::{RunReport, StepReport, TracePoint};
pub use schedule::{LrScheduleState, ScheduleDecision, CHECK_PERIOD, SLOPE_FACTOR, WINDOW};
pub use session::TrainSession;

use std::time::Instant;

use crate::error::{Error, Result};
use crate::image::{apply_geometry, Geometry, Image};
use crate::nn::{self, FeatureMap, NetworkConfig, NetworkParams};
use crate::resample::{
    downscale_with_kernel, downscale_with_kernel_to, resize_bicubic, resize_bicubic_field,
    round_dim, Kernel,
};

/// How LR sons (and back-projection residuals) are produced from a
/// higher-resolution image.
#[derive(Debug, Clone, PartialEq)]
pub enum Downscaler {
    /// The reference bicubic resizer with antialiasing.
    Bicubic,
    /// Convolve-and-subsample with an explicit kernel.
    Kernel(Kernel),
}

impl Downscaler {
    /// Downscale by factor `s`, output dims round(in/s), clamped.
    pub fn downscale(&self, img: &Image, s: f64) -> Result<Image> {
        match self {
            Downscaler::Bicubic => {
                if !(s > 1.0) {
                    return Err(Error::Config(format!("downscale factor must be > 1, got {s}")));
                }
                let oh = round_dim(img.height() as f64 / s);
                let ow = round_dim(img.width() as f64 / s);
                if oh == 0 || ow == 0 {
                    return Err(Error::InvalidInput(format!(
                        "downscaling {}x{} by {} leaves no pixels",
                        img.height(),
                        img.width(),
                        s
                    )));
                }
                Ok(resize_bicubic(img, oh, ow, true))
            }
            Downscaler::Kernel(k) => downscale_with_kernel(img, k, s),
        }
    }

    /// Downscale to explicit dims without clamping, for signed residual
    /// arithmetic.
    pub(crate) fn downscale_to(&self, img: &Image, s: f64, oh: usize, ow: usize) -> Result<Image> {
        match self {
            Downscaler::Bicubic => Ok(resize_bicubic_field(img, oh, ow, true)),
            Downscaler::Kernel(k) => downscale_with_kernel_to(img, k, s, oh, ow),
        }
    }
}

/// Everything a run needs. Defaults follow the reference protocol; the
/// network-size fields exist so constrained hosts can trade capacity for
/// speed without touching code.
#[derive(Debug, Clone, PartialEq)]
pub struct ZssrConfig {
    pub scale_factor: f64,
    pub gradual_steps: usize,
    pub downscaler: Downscaler,
    pub use_backprojection: bool,
    pub backprojection_iters: usize,
    pub inject_noise: bool,
    pub noise_sigma: f64,
    pub crop_size: usize,
    pub lr_init: f64,
    pub lr_floor: f64,
    pub lr_drop_factor: f64,
    pub max_iterations: usize,
    pub hidden_layers: usize,
    pub channels: usize,
    pub seed: u64,
}

impl Default for ZssrConfig {
    fn default() -> Self {
        ZssrConfig {
            scale_factor: 2.0,
            gradual_steps: 6,
            downscaler: Downscaler::Bicubic,
            use_backprojection: true,
            backprojection_iters: 8,
            inject_noise: false,
            noise_sigma: 5.0 / 255.0,
            crop_size: 128,
            lr_init: 1e-3,
            lr_floor: 1e-6,
            lr_drop_factor: 10.0,
            max_iterations: 3000,
            hidden_layers: 8,
            channels: 64,
            seed: 0,
        }
    }
}

impl ZssrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale_factor > 1.0) {
            return Err(Error::Config(format!(
                "scale_factor must be > 1, got {}",
                self.scale_factor
            )));
        }
        if self.gradual_steps < 1 {
            return Err(Error::Config("gradual_steps must be >= 1".into()));
        }
        if !(self.lr_floor > 0.0 && self.lr_floor < self.lr_init) {
            return Err(Error::Config(format!(
                "need 0 < lr_floor < lr_init, got {} and {}",
                self.lr_floor, self.lr_init
            )));
        }
        if !(self.lr_drop_factor > 1.0) {
            return Err(Error::Config("lr_drop_factor must be > 1".into()));
        }
        if self.crop_size < 8 {
            return Err(Error::Config(format!(
                "crop_size must be >= 8, got {}",
                self.crop_size
            )));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        if self.hidden_layers < 1 || self.channels < 1 {
            return Err(Error::Config("network size fields must be >= 1".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        Ok(())
    }

    /// Per-step training factor on the gradual ladder, s^(1/m).
    pub fn step_factor(&self) -> f64 {
        if self.gradual_steps == 1 {
            self.scale_factor
        } else {
            self.scale_factor.powf(1.0 / self.gradual_steps as f64)
        }
    }

    pub(crate) fn network_config(&self, image_channels: usize) -> NetworkConfig {
        NetworkConfig {
            hidden_layers: self.hidden_layers,
            channels: self.channels,
            kernel_size: 3,
            in_channels: image_channels,
            out_channels: image_channels,
        }
    }
}

// ---------------------------------------------------------------------------
// Back-projection
// ---------------------------------------------------------------------------

fn backproject_impl(
    mut hr: Image,
    lr: &Image,
    down: &Downscaler,
    s: f64,
    iters: usize,
) -> Result<(Image, Vec<f64>)> {
    if hr.channels() != lr.channels() {
        return Err(Error::ShapeMismatch(
            "back-projection channel mismatch".into(),
        ));
    }
    let (lh, lw) = (lr.height(), lr.width());
    let residual_l1 = |hr: &Image| -> Result<f64> {
        let d = down.downscale_to(hr, s, lh, lw)?;
        let sum: f64 = d
            .data()
            .iter()
            .zip(lr.data())
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(sum / d.data().len() as f64)
    };

    let mut trace = Vec::with_capacity(iters + 1);
    let mut current = residual_l1(&hr)?;
    trace.push(current);
    for _ in 0..iters {
        let d = down.downscale_to(&hr, s, lh, lw)?;
        let mut residual = lr.clone();
        for (rv, dv) in residual.data_mut().iter_mut().zip(d.data()) {
            *rv -= dv;
        }
        let correction = resize_bicubic_field(&residual, hr.height(), hr.width(), true);
        let mut candidate = hr.clone();
        let mut max_abs = 0.0f64;
        for (cv, &corr) in candidate.data_mut().iter_mut().zip(correction.data()) {
            *cv += corr;
            max_abs = max_abs.max(corr.abs());
        }
        let cand_res = residual_l1(&candidate)?;
        if cand_res > current {
            break;
        }
        hr = candidate;
        current = cand_res;
        trace.push(current);
        if max_abs < 1e-4 {
            break;
        }
    }
    Ok((hr, trace))
}

/// Iterative back-projection: HR absorbs the upscaled reconstruction
/// residual until it is consistent with LR under the downscaler. The
/// LR-space L1 residual never increases; an iteration that would
/// increase it is discarded and the loop exits.
pub fn backproject(
    hr: &Image,
    lr: &Image,
    down: &Downscaler,
    s: f64,
    iters: usize,
) -> Result<Image> {
    let expect_h = round_dim(hr.height() as f64 / s);
    let expect_w = round_dim(hr.width() as f64 / s);
    if (lr.height(), lr.width()) != (expect_h, expect_w) {
        return Err(Error::ShapeMismatch(format!(
            "LR is {}x{} but downscaling {}x{} by {} gives {}x{}",
            lr.height(),
            lr.width(),
            hr.height(),
            hr.width(),
            s,
            expect_h,
            expect_w
        )));
    }
    Ok(backproject_impl(hr.clone(), lr, down, s, iters)?.0)
}

/// As [`backproject`], also returning the LR-space L1 residual before
/// and after each accepted iteration.
pub fn backproject_with_trace(
    hr: &Image,
    lr: &Image,
    down: &Downscaler,
    s: f64,
    iters: usize,
) -> Result<(Image, Vec<f64>)> {
    backproject_impl(hr.clone(), lr, down, s, iters)
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

/// Per-pixel median over the 8 self-ensemble members; an even count
/// averages the two middle order statistics.
fn pixel_median(members: &[Image]) -> Image {
    let first = &members[0];
    let mut out = first.clone();
    let n = members.len();
    let mut vals = vec![0.0f64; n];
    for i in 0..out.data().len() {
        for (slot, m) in vals.iter_mut().zip(members) {
            *slot = m.data()[i];
        }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.data_mut()[i] = if n % 2 == 1 {
            vals[n / 2]
        } else {
            0.5 * (vals[n / 2 - 1] + vals[n / 2])
        };
    }
    out
}

fn predict_to_dims(
    params: &NetworkParams<f32>,
    base: &Image,
    cfg: &ZssrConfig,
    factor: f64,
    out_h: usize,
    out_w: usize,
) -> Result<Image> {
    let mut members = Vec::with_capacity(8);
    for g in Geometry::all() {
        let transformed = apply_geometry(base, g);
        let (th, tw) = if g.swaps_dims() { (out_w, out_h) } else { (out_h, out_w) };
        let up = resize_bicubic(&transformed, th, tw, true);
        let x = FeatureMap::<f32>::from_image(&up);
        let y = nn::apply(params, &x)?;
        let mut member = apply_geometry(&y.to_image(), g.inverse());
        if cfg.use_backprojection {
            member = backproject_impl(member, base, &cfg.downscaler, factor, cfg.backprojection_iters)?.0;
        }
        members.push(member);
    }
    let mut out = pixel_median(&members);
    if cfg.use_backprojection {
        out = backproject_impl(out, base, &cfg.downscaler, factor, cfg.backprojection_iters)?.0;
    }
    out.clamp_unit();
    Ok(out)
}

/// Single-shot prediction at cfg.scale_factor: 8 dihedral variants are
/// upscaled, passed through the network, realigned, back-projected (if
/// enabled), median-combined, back-projected once more, and clamped.
pub fn predict(params: &NetworkParams<f32>, input: &Image, cfg: &ZssrConfig) -> Result<Image> {
    cfg.validate()?;
    let s = cfg.scale_factor;
    let out_h = round_dim(input.height() as f64 * s).max(1);
    let out_w = round_dim(input.width() as f64 * s).max(1);
    predict_to_dims(params, input, cfg, s, out_h, out_w)
}

// ---------------------------------------------------------------------------
// Gradual ladder
// ---------------------------------------------------------------------------

/// Full run: for each ladder step, rebuild the father pool (prior
/// outputs included as extra fathers), train a freshly initialized
/// network, and predict the next rung. Step i targets
/// round(dims(I) * s^(i/m)), so the final output lands exactly on
/// round(dims(I) * s).
pub fn run_gradual_with_report(input: &Image, cfg: &ZssrConfig) -> Result<(Image, RunReport)> {
    cfg.validate()?;
    let s = cfg.scale_factor;
    let m = cfg.gradual_steps;
    let f = cfg.step_factor();
    let (h0, w0) = (input.height() as f64, input.width() as f64);

    let mut report = RunReport::new(s, m, cfg.seed);
    // The resolution chain so far: input first, then each synthesized HR.
    let mut chain: Vec<Image> = vec![input.clone()];

    for i in 1..=m {
        let step_start = Instant::now();
        let factor_i = if i == m { s } else { s.powf(i as f64 / m as f64) };
        let target_h = round_dim(h0 * factor_i).max(1);
        let target_w = round_dim(w0 * factor_i).max(1);

        let base = chain.last().unwrap().clone();
        let extras: Vec<(Image, f64)> = chain[..chain.len() - 1]
            .iter()
            .map(|img| (img.clone(), img.height() as f64 / base.height() as f64))
            .collect();
        let pool = pool::build_pool(&base, &extras, cfg)?;
        let pool_size = pool.len();

        let mut session = TrainSession::new(pool, cfg, base.channels(), i - 1)?;
        session.run()?;

        let hr = predict_to_dims(session.params(), &base, cfg, f, target_h, target_w)?;
        report.push_step(StepReport {
            factor: factor_i,
            target_h,
            target_w,
            pool_size,
            iterations: session.iterations(),
            lr_drops: session.lr_drops(),
            hit_cap: session.hit_cap(),
            wall_seconds: step_start.elapsed().as_secs_f64(),
            trace: session.take_trace(),
        });
        chain.push(hr);
    }
    Ok((chain.pop().unwrap(), report))
}

/// [`run_gradual_with_report`] without the report.
pub fn run_gradual(input: &Image, cfg: &ZssrConfig) -> Result<Image> {
    run_gradual_with_report(input, cfg).map(|(img, _)| img)
}
