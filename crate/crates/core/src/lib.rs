//! Core of the pulsecloud wearable vitals monitor.
//!
//! The crate is split into three layers:
//!
//! * [`signal`]: PPG synthesis, HP-LP band-pass filtering, beat detection,
//!   BPM estimation and calibration scaling.
//! * [`sensors`]: behavioral models of the DS18B20 thermometer and the
//!   pulse-sensor ADC front end.
//! * [`device`]: the wristband firmware as a deterministic state machine
//!   over a virtual clock, with a store-and-forward uplink buffer.
//!
//! The numerical layers are generic over the scalar type (`f32` or `f64`);
//! the aliases at the crate root fix the common `f64` instantiation.

// Validation is written as `!(x > lo)` on purpose so NaN fails it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod device;
pub mod error;
pub mod scalar;
pub mod sensors;
pub mod signal;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision waveform, the default used by the device and CLI.
pub type Waveform = signal::PpgWaveform<f64>;
/// Single-precision waveform.
pub type Waveform32 = signal::PpgWaveform<f32>;
pub type Filter = signal::FilterSpec<f64>;
pub type Calibration = signal::CalibrationRecord<f64>;
pub type Pipeline = signal::PulsePipeline<f64>;
pub type Thermometer = sensors::Ds18b20Model<f64>;
pub type Thermometer32 = sensors::Ds18b20Model<f32>;
pub type Adc = sensors::PulseAdcModel<f64>;
pub type Adc32 = sensors::PulseAdcModel<f32>;
