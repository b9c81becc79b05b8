//! Behavioral sensor models.

mod adc;
pub mod ds18b20;

pub use adc::PulseAdcModel;
pub use ds18b20::{Alarm, Ds18b20Model, TemperatureReading};
