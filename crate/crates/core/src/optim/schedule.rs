//! Learning-rate policies.

use crate::error::{Error, Result};

/// Piecewise-constant decay over equal segments, geometric between them,
/// ending at `base_lr * final_ratio`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub base_lr: f64,
    pub n_iter: usize,
    pub n_segments: usize,
    pub final_ratio: f64,
}

impl StepSchedule {
    /// Ten segments, final rate one tenth of the first.
    pub fn new(base_lr: f64, n_iter: usize) -> Result<Self> {
        Self::with_segments(base_lr, n_iter, 10, 0.1)
    }

    pub fn with_segments(base_lr: f64, n_iter: usize, n_segments: usize, final_ratio: f64) -> Result<Self> {
        if !(base_lr > 0.0 && base_lr.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning rate {base_lr} must be positive")));
        }
        if n_iter == 0 || n_segments == 0 {
            return Err(Error::InvalidParameter("schedule needs iterations and segments".into()));
        }
        if !(final_ratio > 0.0 && final_ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!("final ratio {final_ratio} outside (0, 1]")));
        }
        Ok(Self { base_lr, n_iter, n_segments, final_ratio })
    }

    /// Segment index of iteration `iter`; iterations past the end stay in
    /// the last segment.
    pub fn segment(&self, iter: usize) -> usize {
        let k = (iter as u128 * self.n_segments as u128 / self.n_iter as u128) as usize;
        k.min(self.n_segments - 1)
    }
}

/// `base_lr * final_ratio^(k / (n_segments - 1))` for segment `k`.
pub fn schedule_lr(iter: usize, schedule: &StepSchedule) -> f64 {
    if schedule.n_segments == 1 {
        return schedule.base_lr;
    }
    let k = schedule.segment(iter) as f64;
    let last = (schedule.n_segments - 1) as f64;
    schedule.base_lr * schedule.final_ratio.powf(k / last)
}

/// Either the step schedule or a constant rate (used for tracking).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrPolicy {
    Fixed(f64),
    Step(StepSchedule),
}

impl LrPolicy {
    pub fn lr(&self, iter: usize) -> f64 {
        match self {
            LrPolicy::Fixed(lr) => *lr,
            LrPolicy::Step(s) => schedule_lr(iter, s),
        }
    }
}
