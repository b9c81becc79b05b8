//! PPG signal pipeline: synthesis, HP-LP band-pass, beat detection, BPM
//! estimation and calibration scaling.

mod calibration;
mod filter;
mod peaks;
mod synth;
mod waveform;

use serde::{Deserialize, Serialize};

pub use calibration::{apply_scale, calibrate_scale, CalibrationRecord};
pub use filter::{apply_bandpass, BandPass, FilterSpec, Section, SectionKind};
pub use peaks::{detect_peaks, PeakDetector, PeakTrain};
pub use synth::{synthesize_ppg, PpgSynth};
pub use waveform::{PpgWaveform, CSV_HEADER};

use crate::{Error, Result, Scalar};

/// `60 * F` where `F = (count - 1) / (last - first)`, the reciprocal of the
/// mean inter-beat interval.
pub fn estimate_bpm<F: Scalar>(p: &PeakTrain<F>) -> Result<F> {
    let t = p.times();
    if t.len() < 2 {
        return Err(Error::NoPulse { peaks: t.len() });
    }
    let span = t[t.len() - 1] - t[0];
    let beat_hz = F::from_usize_lossy(t.len() - 1) / span;
    Ok(F::lit(60.0) * beat_hz)
}

/// Band-pass, warm-up trim, beat detection and BPM estimate in one place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulsePipeline<F> {
    pub filter: FilterSpec<F>,
    pub detector: PeakDetector<F>,
    /// Filtered samples in this leading span are not searched for beats.
    pub warmup_s: F,
}

impl<F: Scalar> Default for PulsePipeline<F> {
    fn default() -> Self {
        Self {
            filter: FilterSpec::default(),
            detector: PeakDetector::default(),
            warmup_s: F::lit(2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseAnalysis<F> {
    pub filtered: PpgWaveform<F>,
    /// Beat times relative to the start of the input waveform.
    pub peaks: PeakTrain<F>,
    /// `None` when fewer than two beats were found.
    pub bpm: Option<F>,
}

impl<F: Scalar> PulsePipeline<F> {
    pub fn analyze(&self, w: &PpgWaveform<F>) -> Result<PulseAnalysis<F>> {
        let filtered = apply_bandpass(w, &self.filter)?;
        let settled = filtered.skip_seconds(self.warmup_s);
        let skipped = filtered.len() - settled.len();
        let offset = filtered.time_of(skipped);
        let local = self.detector.detect(&settled)?;
        let peaks = PeakTrain::new(local.times().iter().map(|&t| t + offset).collect())?;
        let bpm = match estimate_bpm(&peaks) {
            Ok(b) => Some(b),
            Err(Error::NoPulse { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(PulseAnalysis { filtered, peaks, bpm })
    }

    /// BPM of `w`, or [`Error::NoPulse`].
    pub fn estimate(&self, w: &PpgWaveform<F>) -> Result<F> {
        let a = self.analyze(w)?;
        a.bpm.ok_or(Error::NoPulse { peaks: a.peaks.len() })
    }
}
