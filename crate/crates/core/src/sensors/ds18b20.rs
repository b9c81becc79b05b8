//! DS18B20 digital thermometer behavioral model.
//!
//! Readings land in a 16-bit two's complement register holding 1/16 °C
//! units; at resolutions below 12 bits the low `12 - r` bits read as zero.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

pub const MIN_C: f64 = -55.0;
pub const MAX_C: f64 = 125.0;
/// Band over which the rated accuracy applies.
pub const ACCURATE_BAND_C: (f64, f64) = (-10.0, 85.0);
/// Error bound assumed outside [`ACCURATE_BAND_C`].
pub const OUTER_ACCURACY_C: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alarm {
    None,
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureReading<F> {
    pub raw16: i16,
    pub celsius: F,
    pub alarm: Alarm,
}

#[derive(Debug, Clone)]
pub struct Ds18b20Model<F> {
    resolution_bits: u8,
    th_c: F,
    tl_c: F,
    accuracy_band_c: F,
    noise_seed: u64,
    noise_enabled: bool,
    rng: ChaCha8Rng,
}

impl<F: Scalar> Ds18b20Model<F> {
    /// Model with sensor error enabled and the default ±0.5 °C band.
    pub fn new(resolution_bits: u8, th_c: F, tl_c: F, noise_seed: u64) -> Result<Self> {
        if !(9..=12).contains(&resolution_bits) {
            return Err(Error::invalid(format!(
                "resolution must be 9..=12 bits, got {resolution_bits}"
            )));
        }
        if !(tl_c < th_c) {
            return Err(Error::invalid(format!(
                "low alarm {tl_c} must be below high alarm {th_c}"
            )));
        }
        Ok(Self {
            resolution_bits,
            th_c,
            tl_c,
            accuracy_band_c: F::lit(0.5),
            noise_seed,
            noise_enabled: true,
            rng: ChaCha8Rng::seed_from_u64(noise_seed),
        })
    }

    /// Power-up configuration: 12 bits, alarms at the range limits.
    pub fn power_up(noise_seed: u64) -> Self {
        Self::new(12, F::lit(MAX_C), F::lit(MIN_C), noise_seed).expect("valid defaults")
    }

    pub fn without_noise(mut self) -> Self {
        self.noise_enabled = false;
        self
    }

    pub fn with_accuracy_band(mut self, band_c: F) -> Result<Self> {
        if !(band_c >= F::zero() && band_c.is_finite()) {
            return Err(Error::invalid("accuracy band must be non-negative"));
        }
        self.accuracy_band_c = band_c;
        Ok(self)
    }

    pub fn resolution_bits(&self) -> u8 {
        self.resolution_bits
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }

    pub fn accuracy_band_c(&self) -> F {
        self.accuracy_band_c
    }

    pub fn th_c(&self) -> F {
        self.th_c
    }

    pub fn tl_c(&self) -> F {
        self.tl_c
    }

    /// Quantization step in °C: `2^(12 - r) / 16`.
    pub fn step_c(&self) -> F {
        F::from_u32(1u32 << (12 - self.resolution_bits)).unwrap() / F::lit(16.0)
    }

    /// 750 ms at 12 bits, halving for every bit dropped.
    pub fn conversion_time(&self) -> Duration {
        Duration::from_micros(750_000 >> (12 - self.resolution_bits))
    }

    pub fn check_alarm(&self, celsius: F) -> Alarm {
        if celsius > self.th_c {
            Alarm::High
        } else if celsius < self.tl_c {
            Alarm::Low
        } else {
            Alarm::None
        }
    }

    /// One convert-T: clamp, perturb, quantize into the scratchpad format.
    pub fn convert_t(&mut self, true_temp_c: F) -> Result<TemperatureReading<F>> {
        if !true_temp_c.is_finite() {
            return Err(Error::invalid("temperature must be finite"));
        }
        let (lo, hi) = (F::lit(MIN_C), F::lit(MAX_C));
        let mut t = true_temp_c.max(lo).min(hi);
        if self.noise_enabled {
            let in_band = t >= F::lit(ACCURATE_BAND_C.0) && t <= F::lit(ACCURATE_BAND_C.1);
            let band = if in_band {
                self.accuracy_band_c.as_f64()
            } else {
                OUTER_ACCURACY_C
            };
            if band > 0.0 {
                t = t + F::lit(self.rng.random_range(-band..=band));
                t = t.max(lo).min(hi);
            }
        }
        let raw16 = self.quantize(t);
        let celsius = F::from_i16(raw16).unwrap() / F::lit(16.0);
        Ok(TemperatureReading {
            raw16,
            celsius,
            alarm: self.check_alarm(celsius),
        })
    }

    fn quantize(&self, celsius: F) -> i16 {
        let fixed = (celsius * F::lit(16.0)).trunc().to_i16().expect("clamped range fits i16");
        let mask: i16 = !((1i16 << (12 - self.resolution_bits)) - 1);
        fixed & mask
    }
}
