use serde::{Deserialize, Serialize};

use crate::signal::PpgWaveform;
use crate::{Error, Result, Scalar};

/// Unipolar successive-approximation ADC in front of the pulse sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseAdcModel<F> {
    pub vref_v: F,
    pub bits: u32,
}

impl<F: Scalar> Default for PulseAdcModel<F> {
    /// 10-bit converter on a 3.3 V reference.
    fn default() -> Self {
        Self {
            vref_v: F::lit(3.3),
            bits: 10,
        }
    }
}

impl<F: Scalar> PulseAdcModel<F> {
    pub fn new(vref_v: F, bits: u32) -> Result<Self> {
        if !(vref_v > F::zero() && vref_v.is_finite()) {
            return Err(Error::invalid(format!("vref must be positive, got {vref_v}")));
        }
        if !(1..=24).contains(&bits) {
            return Err(Error::invalid(format!("bits must be in 1..=24, got {bits}")));
        }
        Ok(Self { vref_v, bits })
    }

    /// Number of codes, `2^bits`.
    pub fn levels(&self) -> u32 {
        1 << self.bits
    }

    /// Volts per count.
    pub fn lsb_v(&self) -> F {
        self.vref_v / F::from_u32(self.levels()).unwrap()
    }

    /// `floor(volts / vref * 2^bits)` clamped to `[0, 2^bits - 1]`.
    pub fn digitize(&self, volts: F) -> u32 {
        let max = self.levels() - 1;
        let code = (volts * F::from_u32(self.levels()).unwrap() / self.vref_v).floor();
        if code.is_nan() || code <= F::zero() {
            0
        } else {
            code.to_u32().map_or(max, |c| c.min(max))
        }
    }

    /// Mid-tread reconstruction `(counts + 0.5) * vref / 2^bits`.
    pub fn undigitize(&self, counts: u32) -> Result<F> {
        if counts >= self.levels() {
            return Err(Error::invalid(format!(
                "count {counts} out of range for a {}-bit converter",
                self.bits
            )));
        }
        Ok((F::from_u32(counts).unwrap() + F::lit(0.5)) * self.lsb_v())
    }

    /// Passes every sample through the converter and back.
    pub fn requantize(&self, w: &PpgWaveform<F>) -> Result<PpgWaveform<F>> {
        let samples = w
            .samples()
            .iter()
            .map(|&v| self.undigitize(self.digitize(v)))
            .collect::<Result<Vec<_>>>()?;
        PpgWaveform::new(samples, w.sample_rate_hz(), w.start_time())
    }
}
