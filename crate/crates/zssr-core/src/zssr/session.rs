//! One training session: owns the network parameters, optimizer state,
//! learning-rate schedule, RNG stream and loss trace for a single
//! gradual step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{adam_step, backward, forward, init_network_with, l1_loss, AdamState, FeatureMap, NetworkParams};
use crate::zssr::pool::{draw_train_pair, FatherPool};
use crate::zssr::report::TracePoint;
use crate::zssr::schedule::{LrScheduleState, ScheduleDecision};
use crate::zssr::ZssrConfig;

pub struct TrainSession {
    cfg: ZssrConfig,
    pool: FatherPool,
    params: NetworkParams<f32>,
    adam: AdamState<f32>,
    schedule: LrScheduleState,
    rng: ChaCha8Rng,
    iteration: usize,
    stopped: bool,
    hit_cap: bool,
    trace: Vec<TracePoint>,
}

impl TrainSession {
    /// Initialization and training draws run on separate, fixed RNG
    /// streams derived from (cfg.seed, step_index), so every step of
    /// every run is reproducible.
    pub fn new(
        pool: FatherPool,
        cfg: &ZssrConfig,
        image_channels: usize,
        step_index: usize,
    ) -> Result<TrainSession> {
        cfg.validate()?;
        if pool.is_empty() {
            return Err(Error::InvalidInput("empty father pool".into()));
        }
        let net_cfg = cfg.network_config(image_channels);
        let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        init_rng.set_stream(2 * step_index as u64);
        let params = init_network_with::<f32>(&net_cfg, &mut init_rng)?;
        let adam = AdamState::new(&params);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(2 * step_index as u64 + 1);
        Ok(TrainSession {
            cfg: cfg.clone(),
            pool,
            adam,
            schedule: LrScheduleState::new(cfg.lr_init, cfg.lr_floor, cfg.lr_drop_factor),
            params,
            rng,
            iteration: 0,
            stopped: false,
            hit_cap: false,
            trace: Vec::new(),
        })
    }

    /// One optimization step: sample a pair, forward, L1 loss, backward,
    /// ADAM at the schedule's current rate. Returns the step loss and
    /// whether the session has finished.
    pub fn step(&mut self) -> Result<(f64, bool)> {
        if self.stopped || self.hit_cap {
            return Err(Error::InvalidInput("session already finished".into()));
        }
        self.iteration += 1;
        let pair = draw_train_pair(&self.pool, &self.cfg, &mut self.rng)?;
        let x = FeatureMap::<f32>::from_image(&pair.input);
        let t = FeatureMap::<f32>::from_image(&pair.target);
        let (y, fwd) = forward(&self.params, &x)?;
        let (loss, grad_out) = l1_loss(&y, &t)?;
        let loss = loss as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss became non-finite at iteration {}",
                self.iteration
            )));
        }
        let grads = backward(&self.params, &fwd, &grad_out)?;
        let lr = self.schedule.current_lr();
        adam_step(&mut self.params, &grads, &mut self.adam, lr)?;

        self.trace.push(TracePoint {
            iter: self.iteration,
            loss,
            lr,
        });
        self.schedule.record(self.iteration, loss);
        if self.iteration % crate::zssr::schedule::CHECK_PERIOD == 0 {
            if let ScheduleDecision::Stop = self.schedule.update(self.iteration) {
                self.stopped = true;
            }
        }
        if self.iteration >= self.cfg.max_iterations && !self.stopped {
            self.hit_cap = true;
        }
        Ok((loss, self.stopped || self.hit_cap))
    }

    /// Train until the schedule stops or the iteration cap is reached.
    pub fn run(&mut self) -> Result<()> {
        loop {
            let (_, done) = self.step()?;
            if done {
                return Ok(());
            }
        }
    }

    pub fn params(&self) -> &NetworkParams<f32> {
        &self.params
    }

    pub fn iterations(&self) -> usize {
        self.iteration
    }

    pub fn lr_drops(&self) -> usize {
        self.schedule.drops()
    }

    pub fn hit_cap(&self) -> bool {
        self.hit_cap
    }

    pub fn take_trace(&mut self) -> Vec<TracePoint> {
        std::mem::take(&mut self.trace)
    }
}
