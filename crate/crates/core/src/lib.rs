//! Blind channel equalization with variational autoencoders.
//!
//! The equalizer (a second-order Volterra filter followed by a soft
//! demapper) produces a factorized posterior over the transmitted symbols;
//! the channel model (linear FIR, or a second-order Volterra series)
//! reconstructs the received signal from that posterior. Both are trained
//! jointly by minimizing the analytic negative ELBO.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix it to double precision, which is what the
//! simulators and the experiment harness use.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channels;
pub mod dsp;
pub mod elbo;
pub mod equalizers;
pub mod error;
pub mod optim;
pub mod qstats;
pub mod scalar;
pub mod sym;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Constellation64 = qstats::Constellation<f64>;
pub type SymbolProbabilities64 = qstats::SymbolProbabilities<f64>;
pub type MomentSequence64 = qstats::MomentSequence<f64>;
pub type SymMatrix64 = sym::SymMatrix<f64>;
pub type LinearChannelModel64 = elbo::LinearChannelModel<f64>;
pub type VolterraChannelModel64 = elbo::VolterraChannelModel<f64>;
pub type ChannelModel64 = elbo::ChannelModel<f64>;
pub type SymbolPrior64 = elbo::SymbolPrior<f64>;
pub type Equalizer64 = equalizers::Equalizer<f64>;
pub type FfeEqualizer64 = equalizers::FfeEqualizer<f64>;
pub type VolterraEqualizer64 = equalizers::VolterraEqualizer<f64>;
pub type SoftDemapper64 = equalizers::SoftDemapper<f64>;
pub type BlindModel64 = optim::BlindModel<f64>;
pub type BlindTrainer64 = optim::BlindTrainer<f64>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
