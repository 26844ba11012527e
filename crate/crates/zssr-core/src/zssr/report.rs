//! Run report: human-readable key-value summary plus a machine-readable
//! loss trace.

use std::fmt::Write as _;

/// One recorded training iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub iter: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub factor: f64,
    pub target_h: usize,
    pub target_w: usize,
    pub pool_size: usize,
    pub iterations: usize,
    pub lr_drops: usize,
    pub hit_cap: bool,
    pub wall_seconds: f64,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    scale: f64,
    gradual_steps: usize,
    seed: u64,
    steps: Vec<StepReport>,
}

impl RunReport {
    pub(crate) fn new(scale: f64, gradual_steps: usize, seed: u64) -> Self {
        RunReport {
            scale,
            gradual_steps,
            seed,
            steps: Vec::new(),
        }
    }

    pub(crate) fn push_step(&mut self, step: StepReport) {
        self.steps.push(step);
    }

    pub fn steps(&self) -> &[StepReport] {
        &self.steps
    }

    /// Key-value summary, one `key: value` line per fact.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scale: {}", self.scale);
        let _ = writeln!(out, "gradual_steps: {}", self.gradual_steps);
        let _ = writeln!(out, "seed: {}", self.seed);
        let factors: Vec<String> = self.steps.iter().map(|s| format!("{:.6}", s.factor)).collect();
        let _ = writeln!(out, "step_factors: {}", factors.join(" "));
        for (i, s) in self.steps.iter().enumerate() {
            let n = i + 1;
            let _ = writeln!(out, "step{n}_target: {}x{}", s.target_h, s.target_w);
            let _ = writeln!(out, "step{n}_pool_size: {}", s.pool_size);
            let _ = writeln!(out, "step{n}_iterations: {}", s.iterations);
            let _ = writeln!(out, "step{n}_lr_drops: {}", s.lr_drops);
            let _ = writeln!(out, "step{n}_hit_iteration_cap: {}", s.hit_cap);
            let _ = writeln!(out, "step{n}_wall_seconds: {:.3}", s.wall_seconds);
        }
        out
    }

    /// The concatenated loss trace as CSV with columns iter,loss,lr.
    /// Iterations restart at 1 for each gradual step; a step column keeps
    /// the rows unambiguous.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("step,iter,loss,lr\n");
        for (i, s) in self.steps.iter().enumerate() {
            for p in &s.trace {
                let _ = writeln!(out, "{},{},{},{}", i + 1, p.iter, p.loss, p.lr);
            }
        }
        out
    }
}
