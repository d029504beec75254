//! Experiment harness for the blind equalizers: SER sweeps over the
//! Wiener-Hammerstein and IM/DD links, learning-rate screening, the
//! change-point tracking run and eye-diagram export.

pub mod config;
pub mod eye;
pub mod output;
pub mod runner;
pub mod seeds;
pub mod stats;
pub mod sweep;
pub mod tracking;
