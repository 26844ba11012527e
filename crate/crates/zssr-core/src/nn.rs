//! A small fully-convolutional residual network: a stack of 3x3 conv +
//! ReLU hidden layers and a linear projection, with y = x + Net(x).
//! Convolutions run as im2col + GEMM with edge-replicate padding, in
//! either f32 or f64 via the [`scalar::Scalar`] trait.

pub mod adam;
pub mod checkpoint;
pub mod scalar;

pub use adam::{adam_step, AdamState};
pub use scalar::Scalar;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;

/// Architecture description. `hidden_layers` counts the conv+ReLU
/// stack; one linear conv layer projecting back to `out_channels` is
/// always appended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkConfig {
    pub hidden_layers: usize,
    pub channels: usize,
    pub kernel_size: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden_layers: 8,
            channels: 64,
            kernel_size: 3,
            in_channels: 3,
            out_channels: 3,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers < 1 {
            return Err(Error::Config("hidden_layers must be >= 1".into()));
        }
        if self.channels < 1 || self.in_channels < 1 || self.out_channels < 1 {
            return Err(Error::Config("channel counts must be >= 1".into()));
        }
        if self.kernel_size < 1 || self.kernel_size % 2 == 0 {
            return Err(Error::Config(format!(
                "kernel_size must be odd and >= 1, got {}",
                self.kernel_size
            )));
        }
        Ok(())
    }

    /// (in, out) channel pairs for every conv layer, hidden stack first,
    /// projection last.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 1);
        dims.push((self.in_channels, self.channels));
        for _ in 1..self.hidden_layers {
            dims.push((self.channels, self.channels));
        }
        dims.push((self.channels, self.out_channels));
        dims
    }
}

/// Channel-major planar tensor, the in-network counterpart of [`Image`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<S> {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> FeatureMap<S> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap {
            channels,
            height,
            width,
            data: vec![S::zero(); channels * height * width],
        }
    }

    pub fn from_image(img: &Image) -> Self {
        FeatureMap {
            channels: img.channels(),
            height: img.height(),
            width: img.width(),
            data: img.data().iter().map(|&v| S::from_f64(v)).collect(),
        }
    }

    /// Back to an [`Image`]; samples are not clamped.
    pub fn to_image(&self) -> Image {
        Image::raw(
            self.height,
            self.width,
            self.channels,
            self.data.iter().map(|&v| v.to_f64()).collect(),
        )
    }

    pub fn plane(&self, c: usize) -> &[S] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }
}

/// One conv layer; weights are row-major (out_ch x in_ch*k*k), which is
/// exactly the GEMM left operand over im2col columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<S> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub weight: Vec<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> ConvLayer<S> {
    fn zeros(in_ch: usize, out_ch: usize, k: usize) -> Self {
        ConvLayer {
            in_ch,
            out_ch,
            k,
            weight: vec![S::zero(); out_ch * in_ch * k * k],
            bias: vec![S::zero(); out_ch],
        }
    }
}

/// All parameters of a network; also the container shape for gradients
/// and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<S> {
    pub config: NetworkConfig,
    layers: Vec<ConvLayer<S>>,
}

impl<S: Scalar> NetworkParams<S> {
    /// Zero-valued parameters shaped for `cfg`.
    pub fn zeros(cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        let layers = cfg
            .layer_dims()
            .into_iter()
            .map(|(i, o)| ConvLayer::zeros(i, o, cfg.kernel_size))
            .collect();
        Ok(NetworkParams { config: *cfg, layers })
    }

    pub fn zeros_like(&self) -> Self {
        NetworkParams::zeros(&self.config).expect("existing config is valid")
    }

    pub fn layers(&self) -> &[ConvLayer<S>] {
        &self.layers
    }

    /// Total scalar parameter count (weights and biases).
    pub fn flat_len(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Flat views in layer order, weights before bias per layer. The
    /// ordering is the checkpoint serialization order.
    pub fn flat_slices(&self) -> Vec<&[S]> {
        let mut v = Vec::with_capacity(self.layers.len() * 2);
        for l in &self.layers {
            v.push(l.weight.as_slice());
            v.push(l.bias.as_slice());
        }
        v
    }

    pub fn flat_slices_mut(&mut self) -> Vec<&mut [S]> {
        let mut v = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            v.push(l.weight.as_mut_slice());
            v.push(l.bias.as_mut_slice());
        }
        v
    }

    pub fn get_flat(&self, idx: usize) -> S {
        let mut i = idx;
        for s in self.flat_slices() {
            if i < s.len() {
                return s[i];
            }
            i -= s.len();
        }
        panic!("flat index {idx} out of range");
    }

    pub fn set_flat(&mut self, idx: usize, v: S) {
        let mut i = idx;
        for s in self.flat_slices_mut() {
            if i < s.len() {
                s[i] = v;
                return;
            }
            i -= s.len();
        }
        panic!("flat index {idx} out of range");
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

/// Seeded initialization: hidden weights uniform on +-sqrt(6/fan_in)
/// (He-style variance 2/fan_in), biases zero, and the final projection
/// all zero so the fresh network is the identity map.
pub fn init_network<S: Scalar>(cfg: &NetworkConfig, seed: u64) -> Result<NetworkParams<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_network_with(cfg, &mut rng)
}

/// As [`init_network`] but drawing from a caller-supplied stream.
pub fn init_network_with<S: Scalar>(
    cfg: &NetworkConfig,
    rng: &mut impl Rng,
) -> Result<NetworkParams<S>> {
    let mut params = NetworkParams::zeros(cfg)?;
    let hidden = cfg.hidden_layers;
    for layer in params.layers.iter_mut().take(hidden) {
        let fan_in = (layer.in_ch * layer.k * layer.k) as f64;
        let bound = (6.0 / fan_in).sqrt();
        for w in &mut layer.weight {
            *w = S::from_f64((2.0 * rng.random::<f64>() - 1.0) * bound);
        }
    }
    Ok(params)
}

// ---------------------------------------------------------------------------
// im2col / col2im
// ---------------------------------------------------------------------------

/// Copy one input row into a col row segment under a horizontal shift
/// with edge replication.
#[inline]
fn shift_row<S: Scalar>(dst: &mut [S], src: &[S], dx: isize) {
    let w = src.len();
    if dx >= w as isize {
        dst.fill(src[w - 1]);
        return;
    }
    if dx <= -(w as isize) {
        dst.fill(src[0]);
        return;
    }
    let lo = (-dx).max(0) as usize;
    let hi = (w as isize - dx.max(0)) as usize;
    dst[..lo].fill(src[0]);
    dst[lo..hi].copy_from_slice(&src[(lo as isize + dx) as usize..(hi as isize + dx) as usize]);
    dst[hi..].fill(src[w - 1]);
}

/// Gather receptive fields: col is (in_ch*k*k) x (h*w) row-major, row
/// index c*k*k + di*k + dj holding the input plane shifted by
/// (di - r, dj - r) with replicated edges.
fn im2col<S: Scalar>(input: &FeatureMap<S>, k: usize, col: &mut Vec<S>) {
    let (h, w) = (input.height, input.width);
    let n = h * w;
    let r = (k / 2) as isize;
    col.resize(input.channels * k * k * n, S::zero());
    let mut row_idx = 0;
    for c in 0..input.channels {
        let plane = input.plane(c);
        for di in 0..k {
            let dy = di as isize - r;
            for dj in 0..k {
                let dx = dj as isize - r;
                let dst_row = &mut col[row_idx * n..(row_idx + 1) * n];
                for y in 0..h {
                    let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    shift_row(&mut dst_row[y * w..(y + 1) * w], &plane[sy * w..(sy + 1) * w], dx);
                }
                row_idx += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add col-space gradients back onto an
/// input-shaped gradient, accumulating replicated-edge taps into the
/// border samples they read from.
fn col2im_add<S: Scalar>(col: &[S], channels: usize, h: usize, w: usize, k: usize, out: &mut FeatureMap<S>) {
    let n = h * w;
    let r = (k / 2) as isize;
    let mut row_idx = 0;
    for c in 0..channels {
        let plane_off = c * n;
        for di in 0..k {
            let dy = di as isize - r;
            for dj in 0..k {
                let dx = dj as isize - r;
                let src_row = &col[row_idx * n..(row_idx + 1) * n];
                for y in 0..h {
                    let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    let dst = &mut out.data[plane_off + sy * w..plane_off + (sy + 1) * w];
                    let src = &src_row[y * w..(y + 1) * w];
                    for x in 0..w {
                        let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                        dst[sx] += src[x];
                    }
                }
                row_idx += 1;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

fn conv_forward<S: Scalar>(layer: &ConvLayer<S>, input: &FeatureMap<S>, col: &mut Vec<S>) -> FeatureMap<S> {
    let (h, w) = (input.height, input.width);
    let n = h * w;
    let rk = layer.in_ch * layer.k * layer.k;
    im2col(input, layer.k, col);
    let mut out = FeatureMap::zeros(layer.out_ch, h, w);
    unsafe {
        S::gemm(
            layer.out_ch,
            rk,
            n,
            S::one(),
            layer.weight.as_ptr(),
            rk as isize,
            1,
            col.as_ptr(),
            n as isize,
            1,
            S::zero(),
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    for o in 0..layer.out_ch {
        let b = layer.bias[o];
        for v in &mut out.data[o * n..(o + 1) * n] {
            *v += b;
        }
    }
    out
}

fn relu_inplace<S: Scalar>(fm: &mut FeatureMap<S>) {
    for v in &mut fm.data {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
}

/// Cached activations from a forward pass: the network input followed by
/// every hidden layer's post-ReLU output.
pub struct ForwardState<S> {
    activations: Vec<FeatureMap<S>>,
}

/// Run the network and keep activations for [`backward`]. Returns
/// y = x + Net(x), unclamped.
pub fn forward<S: Scalar>(
    p: &NetworkParams<S>,
    x: &FeatureMap<S>,
) -> Result<(FeatureMap<S>, ForwardState<S>)> {
    if x.channels != p.config.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "network expects {} input channels, got {}",
            p.config.in_channels, x.channels
        )));
    }
    let hidden = p.config.hidden_layers;
    let mut col = Vec::new();
    let mut activations = Vec::with_capacity(hidden + 1);
    activations.push(x.clone());
    for layer in &p.layers[..hidden] {
        let mut a = conv_forward(layer, activations.last().unwrap(), &mut col);
        relu_inplace(&mut a);
        activations.push(a);
    }
    let z = conv_forward(&p.layers[hidden], activations.last().unwrap(), &mut col);
    let mut y = x.clone();
    for (yv, zv) in y.data.iter_mut().zip(&z.data) {
        *yv += *zv;
    }
    Ok((y, ForwardState { activations }))
}

/// Inference-only forward pass; no activation caching.
pub fn apply<S: Scalar>(p: &NetworkParams<S>, x: &FeatureMap<S>) -> Result<FeatureMap<S>> {
    if x.channels != p.config.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "network expects {} input channels, got {}",
            p.config.in_channels, x.channels
        )));
    }
    let hidden = p.config.hidden_layers;
    let mut col = Vec::new();
    let mut a = conv_forward(&p.layers[0], x, &mut col);
    relu_inplace(&mut a);
    for layer in &p.layers[1..hidden] {
        a = conv_forward(layer, &a, &mut col);
        relu_inplace(&mut a);
    }
    let z = conv_forward(&p.layers[hidden], &a, &mut col);
    let mut y = x.clone();
    for (yv, zv) in y.data.iter_mut().zip(&z.data) {
        *yv += *zv;
    }
    Ok(y)
}

/// Exact parameter gradients for the loss whose gradient w.r.t. the
/// network output is `grad_out`. The residual skip path only routes
/// gradient to the input, not to any parameter, so it needs no extra
/// terms here.
pub fn backward<S: Scalar>(
    p: &NetworkParams<S>,
    st: &ForwardState<S>,
    grad_out: &FeatureMap<S>,
) -> Result<NetworkParams<S>> {
    let hidden = p.config.hidden_layers;
    if st.activations.len() != hidden + 1 {
        return Err(Error::InvalidInput(
            "forward state does not match network depth".into(),
        ));
    }
    let last = st.activations.last().unwrap();
    if grad_out.channels != p.config.out_channels
        || grad_out.height != last.height
        || grad_out.width != last.width
    {
        return Err(Error::ShapeMismatch("grad_out shape mismatch".into()));
    }

    let (h, w) = (grad_out.height, grad_out.width);
    let n = h * w;
    let mut grads = p.zeros_like();
    let mut col = Vec::new();
    let mut colg: Vec<S> = Vec::new();
    // Gradient w.r.t. the current layer's output; starts at the
    // projection layer since d(x + z)/dz = 1.
    let mut g = grad_out.clone();

    for idx in (0..=hidden).rev() {
        let layer = &p.layers[idx];
        let input = &st.activations[idx];
        let rk = layer.in_ch * layer.k * layer.k;
        let grad_layer = &mut grads.layers[idx];

        for o in 0..layer.out_ch {
            let mut acc = S::zero();
            for &v in &g.data[o * n..(o + 1) * n] {
                acc += v;
            }
            grad_layer.bias[o] = acc;
        }

        // dW = G (out x n) * col^T (n x rk).
        im2col(input, layer.k, &mut col);
        unsafe {
            S::gemm(
                layer.out_ch,
                n,
                rk,
                S::one(),
                g.data.as_ptr(),
                n as isize,
                1,
                col.as_ptr(),
                1,
                n as isize,
                S::zero(),
                grad_layer.weight.as_mut_ptr(),
                rk as isize,
                1,
            );
        }

        if idx == 0 {
            break;
        }

        // dCol = W^T (rk x out) * G (out x n), then scatter back and gate
        // through the preceding ReLU.
        colg.resize(rk * n, S::zero());
        unsafe {
            S::gemm(
                rk,
                layer.out_ch,
                n,
                S::one(),
                layer.weight.as_ptr(),
                1,
                rk as isize,
                g.data.as_ptr(),
                n as isize,
                1,
                S::zero(),
                colg.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        let mut gin = FeatureMap::zeros(layer.in_ch, h, w);
        col2im_add(&colg, layer.in_ch, h, w, layer.k, &mut gin);
        for (gv, &av) in gin.data.iter_mut().zip(&input.data) {
            if av <= S::zero() {
                *gv = S::zero();
            }
        }
        g = gin;
    }
    Ok(grads)
}

/// Mean absolute error and its gradient w.r.t. `pred`, with sign(0) = 0.
pub fn l1_loss<S: Scalar>(pred: &FeatureMap<S>, target: &FeatureMap<S>) -> Result<(S, FeatureMap<S>)> {
    if !pred.same_shape(target) {
        return Err(Error::ShapeMismatch(format!(
            "l1_loss shapes differ: {}x{}x{} vs {}x{}x{}",
            pred.channels, pred.height, pred.width, target.channels, target.height, target.width
        )));
    }
    let n = S::from_f64(pred.data.len() as f64);
    let inv_n = S::one() / n;
    let mut loss = S::zero();
    let mut grad = FeatureMap::zeros(pred.channels, pred.height, pred.width);
    for ((gv, &pv), &tv) in grad.data.iter_mut().zip(&pred.data).zip(&target.data) {
        let d = pv - tv;
        loss += d.abs();
        if d > S::zero() {
            *gv = inv_n;
        } else if d < S::zero() {
            *gv = -inv_n;
        }
    }
    Ok((loss * inv_n, grad))
}
