//! Adam, learning-rate schedules, gradient verification and training.

pub mod adam;
pub mod gradcheck;
pub mod objective;
pub mod schedule;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, GradCheckReport, DEFAULT_REL_STEP};
pub use objective::{blind_objective, supervised_objective, Batch, BlindModel};
pub use schedule::{schedule_lr, LrPolicy, StepSchedule};
pub use train::{train_blind, train_supervised, BlindTrainer, LossTrace, TraceRow, TrainConfig};
