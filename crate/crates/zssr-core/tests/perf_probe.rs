//! Manual timing probe for the training hot loop. Run on demand with
//! `cargo test --release -p zssr-core --test perf_probe -- --ignored --nocapture`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zssr_core::nn::{
    adam_step, backward, forward, init_network, l1_loss, AdamState, FeatureMap, NetworkConfig,
};

fn time_config(hidden: usize, channels: usize, crop: usize, iters: usize) -> f64 {
    let cfg = NetworkConfig {
        hidden_layers: hidden,
        channels,
        in_channels: 3,
        out_channels: 3,
        ..NetworkConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut p = init_network::<f32>(&cfg, 1).unwrap();
    let mut st = AdamState::new(&p);
    let x = FeatureMap::<f32> {
        channels: 3,
        height: crop,
        width: crop,
        data: (0..3 * crop * crop).map(|_| rng.random::<f32>()).collect(),
    };
    let t = FeatureMap::<f32> {
        data: (0..3 * crop * crop).map(|_| rng.random::<f32>()).collect(),
        ..x.clone()
    };
    let start = Instant::now();
    for _ in 0..iters {
        let (y, fwd) = forward(&p, &x).unwrap();
        let (_, grad_out) = l1_loss(&y, &t).unwrap();
        let grads = backward(&p, &fwd, &grad_out).unwrap();
        adam_step(&mut p, &grads, &mut st, 1e-3).unwrap();
    }
    start.elapsed().as_secs_f64() / iters as f64
}

#[test]
#[ignore]
fn training_step_timings() {
    for &(hidden, channels, crop) in &[
        (8usize, 64usize, 128usize),
        (8, 64, 64),
        (8, 48, 64),
        (8, 32, 64),
        (8, 32, 48),
        (6, 32, 64),
        (8, 24, 64),
        (8, 32, 96),
    ] {
        let iters = if crop >= 128 || channels >= 64 { 5 } else { 20 };
        let per = time_config(hidden, channels, crop, iters);
        println!(
            "hidden={hidden} ch={channels} crop={crop}: {:.1} ms/iter ({:.0} iter/min)",
            per * 1e3,
            60.0 / per
        );
    }
}
