//! Cascaded first-order IIR band-pass (high-pass stages followed by
//! low-pass stages), each section obtained from the analog RC prototype by
//! the prewarped bilinear transform.

use serde::{Deserialize, Serialize};

use super::PpgWaveform;
use crate::{Error, Result, Scalar};

/// Cutoffs and order of the HP-LP chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec<F> {
    pub hp_cutoff_hz: F,
    pub lp_cutoff_hz: F,
    pub stages_per_side: usize,
}

impl<F: Scalar> Default for FilterSpec<F> {
    fn default() -> Self {
        Self {
            hp_cutoff_hz: F::lit(0.8),
            lp_cutoff_hz: F::lit(3.5),
            stages_per_side: 2,
        }
    }
}

impl<F: Scalar> FilterSpec<F> {
    pub fn new(hp_cutoff_hz: F, lp_cutoff_hz: F, stages_per_side: usize) -> Self {
        Self {
            hp_cutoff_hz,
            lp_cutoff_hz,
            stages_per_side,
        }
    }

    /// Checks `0 < hp < lp < fs/2` and `stages_per_side >= 1`.
    pub fn validate(&self, sample_rate_hz: F) -> Result<()> {
        if self.stages_per_side < 1 {
            return Err(Error::invalid("stages_per_side must be at least 1"));
        }
        let nyquist = sample_rate_hz / F::lit(2.0);
        if !(self.hp_cutoff_hz > F::zero()) {
            return Err(Error::invalid(format!(
                "high-pass cutoff {} Hz must be positive",
                self.hp_cutoff_hz
            )));
        }
        if !(self.hp_cutoff_hz < self.lp_cutoff_hz) {
            return Err(Error::invalid(format!(
                "high-pass cutoff {} Hz must be below low-pass cutoff {} Hz",
                self.hp_cutoff_hz, self.lp_cutoff_hz
            )));
        }
        if !(self.lp_cutoff_hz < nyquist) {
            return Err(Error::invalid(format!(
                "low-pass cutoff {} Hz must be below Nyquist {} Hz",
                self.lp_cutoff_hz, nyquist
            )));
        }
        Ok(())
    }

    /// Builds the section cascade for a given sample rate.
    pub fn design(&self, sample_rate_hz: F) -> Result<BandPass<F>> {
        self.validate(sample_rate_hz)?;
        let mut sections = Vec::with_capacity(2 * self.stages_per_side);
        for _ in 0..self.stages_per_side {
            sections.push(Section::high_pass(self.hp_cutoff_hz, sample_rate_hz));
        }
        for _ in 0..self.stages_per_side {
            sections.push(Section::low_pass(self.lp_cutoff_hz, sample_rate_hz));
        }
        Ok(BandPass { sections })
    }
}

/// Band-passes a waveform. Output has the same length, rate and start time.
///
/// Filter state is primed as if the first sample had been held forever, so
/// a constant input produces an all-zero output.
pub fn apply_bandpass<F: Scalar>(w: &PpgWaveform<F>, spec: &FilterSpec<F>) -> Result<PpgWaveform<F>> {
    let mut chain = spec.design(w.sample_rate_hz())?;
    let out = chain.filter(w.samples());
    PpgWaveform::new(out, w.sample_rate_hz(), w.start_time())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionKind {
    HighPass,
    LowPass,
}

/// One first-order section `y[n] = b0 x[n] + b1 x[n-1] - a1 y[n-1]`.
#[derive(Debug, Clone)]
pub struct Section<F> {
    kind: SectionKind,
    b0: F,
    b1: F,
    a1: F,
    x1: F,
    y1: F,
}

impl<F: Scalar> Section<F> {
    pub fn high_pass(cutoff_hz: F, sample_rate_hz: F) -> Self {
        let k = prewarp(cutoff_hz, sample_rate_hz);
        let norm = F::one() / (F::one() + k);
        Self {
            kind: SectionKind::HighPass,
            b0: norm,
            b1: -norm,
            a1: (k - F::one()) * norm,
            x1: F::zero(),
            y1: F::zero(),
        }
    }

    pub fn low_pass(cutoff_hz: F, sample_rate_hz: F) -> Self {
        let k = prewarp(cutoff_hz, sample_rate_hz);
        let norm = F::one() / (F::one() + k);
        Self {
            kind: SectionKind::LowPass,
            b0: k * norm,
            b1: k * norm,
            a1: (k - F::one()) * norm,
            x1: F::zero(),
            y1: F::zero(),
        }
    }

    pub fn kind(&self) -> SectionKind {
        self.kind
    }

    /// `(b0, b1, a1)`.
    pub fn coefficients(&self) -> (F, F, F) {
        (self.b0, self.b1, self.a1)
    }

    /// Sets the state to the steady state for a constant input `u` and
    /// returns the steady-state output.
    pub fn prime(&mut self, u: F) -> F {
        let y = match self.kind {
            SectionKind::HighPass => F::zero(),
            SectionKind::LowPass => u,
        };
        self.x1 = u;
        self.y1 = y;
        y
    }

    #[inline]
    pub fn step(&mut self, x: F) -> F {
        let y = self.b0 * x + self.b1 * self.x1 - self.a1 * self.y1;
        self.x1 = x;
        self.y1 = y;
        y
    }

    /// `|H(e^{jw})|` at `freq_hz`, evaluated from the difference equation.
    pub fn gain_at(&self, freq_hz: F, sample_rate_hz: F) -> F {
        let w = F::TAU() * freq_hz / sample_rate_hz;
        let (s, c) = w.sin_cos();
        // H = (b0 + b1 e^{-jw}) / (1 + a1 e^{-jw})
        let num_re = self.b0 + self.b1 * c;
        let num_im = -self.b1 * s;
        let den_re = F::one() + self.a1 * c;
        let den_im = -self.a1 * s;
        (num_re.hypot(num_im)) / (den_re.hypot(den_im))
    }
}

fn prewarp<F: Scalar>(cutoff_hz: F, sample_rate_hz: F) -> F {
    (F::PI() * cutoff_hz / sample_rate_hz).tan()
}

/// A designed HP-LP cascade carrying its own state.
#[derive(Debug, Clone)]
pub struct BandPass<F> {
    sections: Vec<Section<F>>,
}

impl<F: Scalar> BandPass<F> {
    pub fn sections(&self) -> &[Section<F>] {
        &self.sections
    }

    pub fn prime(&mut self, u: F) {
        let mut v = u;
        for s in &mut self.sections {
            v = s.prime(v);
        }
    }

    #[inline]
    pub fn step(&mut self, x: F) -> F {
        self.sections.iter_mut().fold(x, |v, s| s.step(v))
    }

    /// Primes on the first sample, then filters the whole slice.
    pub fn filter(&mut self, input: &[F]) -> Vec<F> {
        let Some(&first) = input.first() else {
            return Vec::new();
        };
        self.prime(first);
        input.iter().map(|&x| self.step(x)).collect()
    }

    /// Cascade magnitude response at `freq_hz`.
    pub fn gain_at(&self, freq_hz: F, sample_rate_hz: F) -> F {
        self.sections
            .iter()
            .map(|s| s.gain_at(freq_hz, sample_rate_hz))
            .fold(F::one(), |acc, g| acc * g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{DateTime, Utc};

    fn wave(samples: Vec<f64>) -> PpgWaveform<f64> {
        PpgWaveform::new(samples, 50.0, DateTime::<Utc>::UNIX_EPOCH).unwrap()
    }

    #[test]
    fn rejects_cutoffs_outside_nyquist() {
        let w = wave(vec![0.0; 10]);
        assert!(apply_bandpass(&w, &FilterSpec::new(0.8, 25.0, 1)).is_err());
        assert!(apply_bandpass(&w, &FilterSpec::new(0.8, 30.0, 1)).is_err());
        assert!(apply_bandpass(&w, &FilterSpec::new(3.5, 0.8, 1)).is_err());
        assert!(apply_bandpass(&w, &FilterSpec::new(0.0, 3.5, 1)).is_err());
        assert!(apply_bandpass(&w, &FilterSpec::new(0.8, 3.5, 0)).is_err());
    }

    #[test]
    fn empty_input_gives_empty_output() {
        let out = apply_bandpass(&wave(vec![]), &FilterSpec::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn dc_gains() {
        let hp = Section::<f64>::high_pass(0.8, 50.0);
        let lp = Section::<f64>::low_pass(3.5, 50.0);
        assert!(hp.gain_at(0.0, 50.0).abs() < 1e-15);
        assert!((lp.gain_at(0.0, 50.0) - 1.0).abs() < 1e-15);
        assert!(lp.gain_at(25.0, 50.0).abs() < 1e-12);
        assert!((hp.gain_at(25.0, 50.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cutoff_is_minus_3db() {
        let hp = Section::<f64>::high_pass(0.8, 50.0);
        let lp = Section::<f64>::low_pass(3.5, 50.0);
        let half_power = std::f64::consts::FRAC_1_SQRT_2;
        assert!((hp.gain_at(0.8, 50.0) - half_power).abs() < 1e-12);
        assert!((lp.gain_at(3.5, 50.0) - half_power).abs() < 1e-12);
    }

    #[test]
    fn single_precision_tracks_double() {
        let input: Vec<f64> = (0..500).map(|i| (i as f64 * 0.2).sin() + 1.0).collect();
        let w64 = wave(input.clone());
        let w32 = PpgWaveform::<f32>::new(
            input.iter().map(|&v| v as f32).collect(),
            50.0,
            DateTime::<Utc>::UNIX_EPOCH,
        )
        .unwrap();
        let a = apply_bandpass(&w64, &FilterSpec::default()).unwrap();
        let b = apply_bandpass(&w32, &FilterSpec::default()).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x - *y as f64).abs() < 1e-4);
        }
    }
}
