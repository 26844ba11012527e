//! Bias-corrected ADAM.

use crate::error::{Error, Result};
use crate::nn::{NetworkParams, Scalar};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First/second moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState<S> {
    m: NetworkParams<S>,
    v: NetworkParams<S>,
    step: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(like: &NetworkParams<S>) -> Self {
        AdamState {
            m: like.zeros_like(),
            v: like.zeros_like(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    #[cfg(test)]
    pub(crate) fn moments(&self) -> (&NetworkParams<S>, &NetworkParams<S>) {
        (&self.m, &self.v)
    }
}

/// One update: p -= lr * mhat / (sqrt(vhat) + eps). Non-finite gradients
/// are refused so a diverging run fails loudly instead of poisoning the
/// parameters.
pub fn adam_step<S: Scalar>(
    params: &mut NetworkParams<S>,
    grads: &NetworkParams<S>,
    state: &mut AdamState<S>,
    lr: f64,
) -> Result<()> {
    if lr <= 0.0 || !lr.is_finite() {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    if !grads.all_finite() {
        return Err(Error::NonFinite("gradients contain NaN or infinity".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = S::from_f64(BETA1);
    let b2 = S::from_f64(BETA2);
    let one = S::one();
    let bc1 = one - b1.powi(t);
    let bc2 = one - b2.powi(t);
    let eps = S::from_f64(EPSILON);
    let lr_s = S::from_f64(lr);

    let mut p = params.flat_slices_mut();
    let g = grads.flat_slices();
    let mut m = state.m.flat_slices_mut();
    let mut v = state.v.flat_slices_mut();
    for i in 0..p.len() {
        let (ps, gs, ms, vs) = (&mut p[i], g[i], &mut m[i], &mut v[i]);
        for j in 0..ps.len() {
            let gj = gs[j];
            ms[j] = b1 * ms[j] + (one - b1) * gj;
            vs[j] = b2 * vs[j] + (one - b2) * gj * gj;
            let mhat = ms[j] / bc1;
            let vhat = vs[j] / bc2;
            ps[j] = ps[j] - lr_s * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}
