use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::signal::CalibrationRecord;
use crate::{Error, Result};

/// Firmware parameters, read from a JSON file with these exact keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    #[serde(default = "defaults::cycle_interval_s")]
    pub cycle_interval_s: f64,
    #[serde(default = "defaults::ppg_window_s")]
    pub ppg_window_s: f64,
    #[serde(default = "defaults::sample_rate_hz")]
    pub sample_rate_hz: f64,
    #[serde(default = "defaults::buffer_capacity")]
    pub buffer_capacity: usize,
    #[serde(default)]
    pub scaling: CalibrationRecord<f64>,
    pub channel_write_key: String,
    #[serde(default = "defaults::server_url")]
    pub server_url: String,
    /// Virtual time origin of the run.
    #[serde(default = "defaults::start_time")]
    pub start_time: DateTime<Utc>,
    /// Seeds the thermometer error and the per-cycle PPG noise.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub patient: PatientProfile,
}

/// The simulated wearer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatientProfile {
    pub temperature_c: f64,
    pub bpm: f64,
    pub dc_offset_v: f64,
    pub noise_rms_v: f64,
    pub drift_v_per_s: f64,
}

impl Default for PatientProfile {
    fn default() -> Self {
        Self {
            temperature_c: 36.6,
            bpm: 77.0,
            dc_offset_v: 1.0,
            noise_rms_v: 0.0,
            drift_v_per_s: 0.0,
        }
    }
}

mod defaults {
    use chrono::{DateTime, TimeZone, Utc};

    pub fn cycle_interval_s() -> f64 {
        1800.0
    }
    pub fn ppg_window_s() -> f64 {
        15.0
    }
    pub fn sample_rate_hz() -> f64 {
        50.0
    }
    pub fn buffer_capacity() -> usize {
        64
    }
    pub fn server_url() -> String {
        "http://127.0.0.1:3000".into()
    }
    pub fn start_time() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
    }
}

impl DeviceConfig {
    pub fn new(channel_write_key: impl Into<String>) -> Self {
        Self {
            cycle_interval_s: defaults::cycle_interval_s(),
            ppg_window_s: defaults::ppg_window_s(),
            sample_rate_hz: defaults::sample_rate_hz(),
            buffer_capacity: defaults::buffer_capacity(),
            scaling: CalibrationRecord::identity(),
            channel_write_key: channel_write_key.into(),
            server_url: defaults::server_url(),
            start_time: defaults::start_time(),
            seed: 0,
            patient: PatientProfile::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.cycle_interval_s) {
            return Err(Error::invalid("cycle_interval_s must be positive"));
        }
        if !positive(self.ppg_window_s) || self.ppg_window_s >= self.cycle_interval_s {
            return Err(Error::invalid("ppg_window_s must be positive and below cycle_interval_s"));
        }
        if !positive(self.sample_rate_hz) {
            return Err(Error::invalid("sample_rate_hz must be positive"));
        }
        if self.buffer_capacity < 1 {
            return Err(Error::invalid("buffer_capacity must be at least 1"));
        }
        if !(self.scaling.scaling_factor > 0.0) {
            return Err(Error::invalid("scaling factor must be positive"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Virtual-time intervals `[start_s, end_s)` during which the link is down.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct OutageSchedule {
    intervals: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for OutageSchedule {
    type Error = Error;

    fn try_from(intervals: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(intervals)
    }
}

impl From<OutageSchedule> for Vec<(f64, f64)> {
    fn from(s: OutageSchedule) -> Self {
        s.intervals
    }
}

impl OutageSchedule {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite() && a >= 0.0 && a < b) {
                return Err(Error::invalid(format!("bad outage interval [{a}, {b}]")));
            }
        }
        Ok(Self { intervals })
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// True if the link is down at `t_s`.
    pub fn is_down(&self, t_s: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| t_s >= a && t_s < b)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
