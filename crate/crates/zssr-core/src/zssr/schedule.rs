//! Plateau-driven learning-rate schedule: periodically fit a line to the
//! recent loss trace and divide the learning rate by 10 when the fitted
//! decrease over the window is dominated by the residual noise.

/// Iterations between schedule checks.
pub const CHECK_PERIOD: usize = 60;
/// Number of recent losses entering the linear fit.
pub const WINDOW: usize = 256;
/// Noise dominance factor in the drop predicate.
pub const SLOPE_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleDecision {
    Continue,
    /// Rate was divided; the new value is attached.
    Dropped(f64),
    /// Rate fell under the floor; training should end.
    Stop,
}

#[derive(Debug, Clone)]
pub struct LrScheduleState {
    current_lr: f64,
    lr_floor: f64,
    drop_factor: f64,
    history: Vec<(usize, f64)>,
    last_check: usize,
    drops: usize,
}

impl LrScheduleState {
    pub fn new(lr_init: f64, lr_floor: f64, drop_factor: f64) -> Self {
        LrScheduleState {
            current_lr: lr_init,
            lr_floor,
            drop_factor,
            history: Vec::new(),
            last_check: 0,
            drops: 0,
        }
    }

    pub fn current_lr(&self) -> f64 {
        self.current_lr
    }

    pub fn drops(&self) -> usize {
        self.drops
    }

    pub fn record(&mut self, iteration: usize, loss: f64) {
        self.history.push((iteration, loss));
        if self.history.len() > WINDOW {
            let excess = self.history.len() - WINDOW;
            self.history.drain(..excess);
        }
    }

    /// Run the check when due. The history is cleared after a drop so
    /// the next fit sees only losses produced at the new rate.
    pub fn update(&mut self, iteration: usize) -> ScheduleDecision {
        if iteration < self.last_check + CHECK_PERIOD {
            return ScheduleDecision::Continue;
        }
        self.last_check = iteration;
        if self.history.len() < WINDOW {
            return ScheduleDecision::Continue;
        }

        let (slope, sigma) = linear_fit_residual_std(&self.history);
        if (-slope) * (WINDOW as f64) < sigma * SLOPE_FACTOR {
            self.current_lr /= self.drop_factor;
            self.drops += 1;
            self.history.clear();
            if self.current_lr < self.lr_floor {
                ScheduleDecision::Stop
            } else {
                ScheduleDecision::Dropped(self.current_lr)
            }
        } else {
            ScheduleDecision::Continue
        }
    }
}

/// Least-squares line over (iteration, loss); returns the per-iteration
/// slope and the residual standard deviation.
fn linear_fit_residual_std(points: &[(usize, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|&(x, _)| x as f64).sum::<f64>() / n;
    let mean_y = points.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        let dx = x as f64 - mean_x;
        sxx += dx * dx;
        sxy += dx * (y - mean_y);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mut ss_res = 0.0;
    for &(x, y) in points {
        let fit = mean_y + slope * (x as f64 - mean_x);
        ss_res += (y - fit) * (y - fit);
    }
    (slope, (ss_res / n).sqrt())
}
