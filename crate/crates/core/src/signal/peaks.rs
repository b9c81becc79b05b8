use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::PpgWaveform;
use crate::{Error, Result, Scalar};

/// Beat times in seconds from the start of the analysed waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakTrain<F> {
    peak_times: Vec<F>,
}

impl<F> Default for PeakTrain<F> {
    fn default() -> Self {
        Self { peak_times: Vec::new() }
    }
}

impl<F: Scalar> PeakTrain<F> {
    /// Fails unless the times are finite, non-negative and strictly increasing.
    pub fn new(peak_times: Vec<F>) -> Result<Self> {
        if peak_times.iter().any(|t| !t.is_finite() || *t < F::zero()) {
            return Err(Error::invalid("peak times must be finite and non-negative"));
        }
        if peak_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("peak times must be strictly increasing"));
        }
        Ok(Self { peak_times })
    }

    pub fn times(&self) -> &[F] {
        &self.peak_times
    }

    pub fn len(&self) -> usize {
        self.peak_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peak_times.is_empty()
    }

    /// Keeps only peaks at or after `t`.
    pub fn after(&self, t: F) -> Self {
        Self {
            peak_times: self.peak_times.iter().copied().filter(|&p| p >= t).collect(),
        }
    }
}

/// Threshold-crossing beat detector with an adaptive midpoint threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakDetector<F> {
    /// Width of the centred min/max window the threshold is taken over.
    pub window_s: F,
    /// Minimum spacing between accepted beats.
    pub refractory_ms: F,
    /// Half-width of the hysteresis band around the threshold, as a
    /// fraction of the window's max - min range.
    pub hysteresis: F,
}

impl<F: Scalar> Default for PeakDetector<F> {
    fn default() -> Self {
        Self {
            window_s: F::lit(3.0),
            refractory_ms: F::lit(250.0),
            hysteresis: F::lit(0.15),
        }
    }
}

impl<F: Scalar> PeakDetector<F> {
    pub fn with_refractory_ms(refractory_ms: F) -> Self {
        Self {
            refractory_ms,
            ..Self::default()
        }
    }

    /// Returns the times of local maxima inside supra-threshold excursions.
    ///
    /// For every sample the threshold is `(min + max) / 2` over a centred
    /// window of `window_s`. An excursion starts when the signal rises above
    /// the threshold plus the hysteresis band and ends when it falls below
    /// the threshold minus the band. Each excursion contributes at most one
    /// candidate, its largest sample, and only if that sample is a strict
    /// interior local maximum. Candidates closer
    /// than `refractory_ms` to the last accepted beat are discarded.
    pub fn detect(&self, w: &PpgWaveform<F>) -> Result<PeakTrain<F>> {
        if !(self.refractory_ms > F::zero()) {
            return Err(Error::invalid("refractory period must be positive"));
        }
        if !(self.window_s > F::zero()) {
            return Err(Error::invalid("threshold window must be positive"));
        }
        if !(self.hysteresis >= F::zero() && self.hysteresis < F::lit(0.5)) {
            return Err(Error::invalid("hysteresis must be in [0, 0.5)"));
        }
        let x = w.samples();
        let n = x.len();
        if n < 3 {
            return Ok(PeakTrain::default());
        }

        let half = (self.window_s * w.sample_rate_hz() / F::lit(2.0))
            .round()
            .to_usize()
            .unwrap_or(0)
            .max(1);
        let (threshold, range) = midpoint_threshold(x, half);
        let band: Vec<F> = range.iter().map(|&r| r * self.hysteresis).collect();
        let refractory_s = self.refractory_ms / F::lit(1000.0);

        let mut times = Vec::new();
        let mut last: Option<usize> = None;
        let mut i = 0;
        while i < n {
            if x[i] <= threshold[i] + band[i] {
                i += 1;
                continue;
            }
            let mut best = i;
            while i < n && x[i] > threshold[i] - band[i] {
                if x[i] > x[best] {
                    best = i;
                }
                i += 1;
            }
            let interior = best > 0 && best + 1 < n;
            if !interior || !(x[best] > x[best - 1] && x[best] >= x[best + 1]) {
                continue;
            }
            if let Some(prev) = last {
                let gap = F::from_usize_lossy(best - prev) / w.sample_rate_hz();
                if gap < refractory_s {
                    continue;
                }
            }
            last = Some(best);
            times.push(w.time_of(best));
        }
        PeakTrain::new(times)
    }
}

/// Detects beats with the default 3 s threshold window.
pub fn detect_peaks<F: Scalar>(w: &PpgWaveform<F>, refractory_ms: F) -> Result<PeakTrain<F>> {
    PeakDetector::with_refractory_ms(refractory_ms).detect(w)
}

/// `(min + max) / 2` and `max - min` over `[i - half, i + half]` for every
/// `i`, clipped to the slice bounds. Monotonic deques keep this linear in
/// `x.len()`.
fn midpoint_threshold<F: Scalar>(x: &[F], half: usize) -> (Vec<F>, Vec<F>) {
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    let mut range = Vec::with_capacity(n);
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    let mut right = 0;
    for i in 0..n {
        let hi = (i + half).min(n - 1);
        while right <= hi {
            while maxq.back().is_some_and(|&j| x[j] <= x[right]) {
                maxq.pop_back();
            }
            maxq.push_back(right);
            while minq.back().is_some_and(|&j| x[j] >= x[right]) {
                minq.pop_back();
            }
            minq.push_back(right);
            right += 1;
        }
        let lo = i.saturating_sub(half);
        while maxq.front().is_some_and(|&j| j < lo) {
            maxq.pop_front();
        }
        while minq.front().is_some_and(|&j| j < lo) {
            minq.pop_front();
        }
        let (mx, mn) = (x[maxq[0]], x[minq[0]]);
        out.push((mx + mn) / F::lit(2.0));
        range.push(mx - mn);
    }
    (out, range)
}
