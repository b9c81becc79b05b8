//! Deterministic PPG test source.

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::PpgWaveform;
use crate::{Error, Result, Scalar};

// Pulse template: systolic wave plus a smaller dicrotic wave, positions and
// widths as fractions of the beat period.
const SYSTOLIC_PHASE: f64 = 0.20;
const SYSTOLIC_WIDTH: f64 = 0.07;
const DICROTIC_PHASE: f64 = 0.50;
const DICROTIC_WIDTH: f64 = 0.10;
const DICROTIC_GAIN: f64 = 0.30;

/// Parameters of a synthetic photodetector trace: a periodic pulse wave on
/// top of a DC offset, a linear drift and white Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct PpgSynth<F> {
    pub bpm: F,
    pub duration_s: F,
    pub sample_rate_hz: F,
    pub dc_offset_v: F,
    pub noise_rms_v: F,
    pub drift_v_per_s: F,
    /// Peak height of the systolic wave above the baseline.
    pub amplitude_v: F,
    pub seed: u64,
    pub start_time: DateTime<Utc>,
}

impl<F: Scalar> PpgSynth<F> {
    pub fn new(bpm: F, duration_s: F, sample_rate_hz: F) -> Self {
        Self {
            bpm,
            duration_s,
            sample_rate_hz,
            dc_offset_v: F::zero(),
            noise_rms_v: F::zero(),
            drift_v_per_s: F::zero(),
            amplitude_v: F::lit(0.5),
            seed: 0,
            start_time: DateTime::<Utc>::UNIX_EPOCH,
        }
    }

    pub fn beat_frequency_hz(&self) -> F {
        self.bpm / F::lit(60.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.bpm >= F::lit(30.0) && self.bpm <= F::lit(240.0)) {
            return Err(Error::invalid(format!("bpm {} outside [30, 240]", self.bpm)));
        }
        if !(self.duration_s > F::zero() && self.duration_s.is_finite()) {
            return Err(Error::invalid("duration must be positive"));
        }
        if !(self.sample_rate_hz > F::zero() && self.sample_rate_hz.is_finite()) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if self.sample_rate_hz < F::lit(4.0) * self.beat_frequency_hz() {
            return Err(Error::invalid(format!(
                "sample rate {} Hz is below 4x the beat frequency",
                self.sample_rate_hz
            )));
        }
        if !(self.noise_rms_v >= F::zero() && self.noise_rms_v.is_finite()) {
            return Err(Error::invalid("noise rms must be non-negative"));
        }
        if !(self.dc_offset_v.is_finite() && self.drift_v_per_s.is_finite() && self.amplitude_v.is_finite()) {
            return Err(Error::invalid("offset, drift and amplitude must be finite"));
        }
        Ok(())
    }

    /// Noise-free pulse wave value at `t` seconds, without offset or drift.
    pub fn pulse_at(&self, t: F) -> F {
        let phase = (t * self.beat_frequency_hz()).fract();
        let bump = |centre: f64, width: f64| {
            let mut d = (phase - F::lit(centre)).abs();
            if d > F::lit(0.5) {
                d = F::one() - d;
            }
            let z = d / F::lit(width);
            (-(z * z) / F::lit(2.0)).exp()
        };
        self.amplitude_v * (bump(SYSTOLIC_PHASE, SYSTOLIC_WIDTH) + F::lit(DICROTIC_GAIN) * bump(DICROTIC_PHASE, DICROTIC_WIDTH))
    }

    /// Offsets in seconds of the systolic maxima inside the trace.
    pub fn systolic_times(&self) -> Vec<F> {
        let period = F::one() / self.beat_frequency_hz();
        (0..)
            .map(|k| (F::from_usize_lossy(k) + F::lit(SYSTOLIC_PHASE)) * period)
            .take_while(|&t| t < self.duration_s)
            .collect()
    }

    pub fn generate(&self) -> Result<PpgWaveform<F>> {
        self.validate()?;
        let n = (self.duration_s * self.sample_rate_hz)
            .floor()
            .to_usize()
            .ok_or_else(|| Error::invalid("duration too long"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.noise_rms_v.as_f64())
            .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
        let samples = (0..n)
            .map(|i| {
                let t = F::from_usize_lossy(i) / self.sample_rate_hz;
                let mut v = self.dc_offset_v + self.drift_v_per_s * t + self.pulse_at(t);
                if self.noise_rms_v > F::zero() {
                    v = v + F::lit(noise.sample(&mut rng));
                }
                v
            })
            .collect();
        PpgWaveform::new(samples, self.sample_rate_hz, self.start_time)
    }
}

/// Synthesizes a PPG trace starting at the Unix epoch.
pub fn synthesize_ppg<F: Scalar>(
    bpm: F,
    duration_s: F,
    sample_rate_hz: F,
    dc_offset_v: F,
    noise_rms_v: F,
    drift_v_per_s: F,
    seed: u64,
) -> Result<PpgWaveform<F>> {
    PpgSynth {
        dc_offset_v,
        noise_rms_v,
        drift_v_per_s,
        seed,
        ..PpgSynth::new(bpm, duration_s, sample_rate_hz)
    }
    .generate()
}
