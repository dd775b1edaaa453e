//! Single-transistor analog joint source-channel coding.
//!
//! Two sensor voltages are folded into one MOSFET drain current, carried to
//! the receiver as an FM tone over a fading, noisy channel, and unfolded
//! again by slope matching against the known transistor curves.
//!
//! - [`mosfet`]: the saturation-region device model.
//! - [`codec`]: level quantizer, encoder and slope-matching decoder.
//! - [`channel`]: FM modulator, Rician/Doppler/AWGN channel, FFT-peak receiver.
//! - [`phenomenon`]: block-correlated ground-truth fields.
//! - [`experiments`]: noiseless, λ, Δ and SNR experiments with block-averaged MSE.
//! - [`config`]: flat key-value run configuration.

// NaN must fail every range check, hence the negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codec;
pub mod config;
pub mod error;
pub mod experiments;
pub mod mosfet;
pub mod phenomenon;
mod seed;

pub use channel::{ChannelConfig, DopplerMode};
pub use codec::{CodecConfig, DecodedPair, DecodedSample, Interval};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use experiments::{ChannelExperiment, DeltaSweep, LambdaRow, MseReport, NoiselessSetup};
pub use mosfet::MosfetParams;
pub use phenomenon::{Field, Geometry};
