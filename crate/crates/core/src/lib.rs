//! Link-level simulation and achievable-rate analysis for uplink massive
//! MIMO-OFDM with low-resolution ADCs and temporal oversampling.

pub mod analysis;
pub mod channel;
pub mod config;
pub mod error;
pub mod montecarlo;
pub mod ofdm;
pub mod quantizer;
pub mod rng;
pub mod validation;

pub use analysis::{CombinerSet, EvalMode, RateResult};
pub use channel::{ChannelParams, ChannelRealization, PathParams};
pub use config::{CombinerMethod, Resolution, SystemConfig};
pub use error::Error;
pub use montecarlo::{ExperimentPlan, SweepRow, SweepTable};
pub use quantizer::QuantizerSpec;

/// Complex sample type used throughout the signal chain.
pub type C64 = num_complex::Complex64;
