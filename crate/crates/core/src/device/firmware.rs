use chrono::{DateTime, Utc};

use super::config::{DeviceConfig, PatientProfile};
use super::state::{DeviceState, Mode};
use super::uplink::{uplink_reading, Transport, UplinkOutcome, VitalsReading};
use super::VirtualClock;
use crate::sensors::{Ds18b20Model, PulseAdcModel};
use crate::signal::{apply_scale, PpgSynth, PpgWaveform, PulsePipeline};
use crate::{Error, Result};

/// Source of the physiological signals the wristband senses.
pub trait Body {
    fn temperature_c(&self, at: DateTime<Utc>) -> f64;

    /// Photodetector voltage over `[start, start + duration_s)`.
    fn ppg(&self, start: DateTime<Utc>, duration_s: f64, sample_rate_hz: f64, seed: u64) -> Result<PpgWaveform<f64>>;
}

impl Body for PatientProfile {
    fn temperature_c(&self, _at: DateTime<Utc>) -> f64 {
        self.temperature_c
    }

    fn ppg(&self, start: DateTime<Utc>, duration_s: f64, sample_rate_hz: f64, seed: u64) -> Result<PpgWaveform<f64>> {
        PpgSynth {
            dc_offset_v: self.dc_offset_v,
            noise_rms_v: self.noise_rms_v,
            drift_v_per_s: self.drift_v_per_s,
            seed,
            start_time: start,
            ..PpgSynth::new(self.bpm, duration_s, sample_rate_hz)
        }
        .generate()
    }
}

/// What one pass through the firmware loop did.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub reading: VitalsReading,
    /// Entry ids of buffered readings delivered this cycle, oldest first.
    pub replayed: Vec<u64>,
    /// Fate of this cycle's own reading; `None` if it went straight to the
    /// buffer because the replay had already failed.
    pub outcome: Option<UplinkOutcome>,
    pub modes: Vec<Mode>,
}

/// The wristband firmware.
#[derive(Debug, Clone)]
pub struct Device {
    config: DeviceConfig,
    state: DeviceState,
    thermometer: Ds18b20Model<f64>,
    adc: PulseAdcModel<f64>,
    pipeline: PulsePipeline<f64>,
    cycle: u64,
}

impl Device {
    pub fn new(config: DeviceConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            state: DeviceState::new(config.buffer_capacity)?,
            thermometer: Ds18b20Model::power_up(config.seed),
            adc: PulseAdcModel::default(),
            pipeline: PulsePipeline::default(),
            cycle: 0,
            config,
        })
    }

    pub fn with_pipeline(mut self, pipeline: PulsePipeline<f64>) -> Self {
        self.pipeline = pipeline;
        self
    }

    pub fn with_thermometer(mut self, thermometer: Ds18b20Model<f64>) -> Self {
        self.thermometer = thermometer;
        self
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    pub fn state(&self) -> &DeviceState {
        &self.state
    }

    pub fn cycles_run(&self) -> u64 {
        self.cycle
    }

    /// A clock whose origin is the configured start time.
    pub fn clock(&self) -> VirtualClock {
        VirtualClock::new(self.config.start_time)
    }

    fn ppg_seed(&self) -> u64 {
        self.config
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(self.cycle)
    }

    fn enter(&mut self, mode: Mode, trace: &mut Vec<Mode>) {
        self.state.transition(mode);
        trace.push(mode);
    }

    /// Runs one acquisition/upload cycle starting at the current virtual
    /// time, then parks the clock on the next cycle boundary.
    pub fn run_cycle<B, T>(&mut self, clock: &VirtualClock, body: &B, transport: &mut T) -> Result<CycleReport>
    where
        B: Body + ?Sized,
        T: Transport + ?Sized,
    {
        let mut modes = vec![self.state.mode()];
        let cycle_start_s = clock.elapsed_s();
        let window_start = clock.now();

        self.enter(Mode::Sampling, &mut modes);
        let raw = body.ppg(
            window_start,
            self.config.ppg_window_s,
            self.config.sample_rate_hz,
            self.ppg_seed(),
        )?;
        let capture = self.adc.requantize(&raw)?;
        let temperature = self.thermometer.convert_t(body.temperature_c(window_start))?;
        clock.advance_s(self.config.ppg_window_s);

        self.enter(Mode::Processing, &mut modes);
        let pulse_bpm = match self.pipeline.analyze(&capture)?.bpm {
            Some(bpm) => Some(apply_scale(bpm, &self.config.scaling)?),
            None => None,
        };
        let reading = VitalsReading {
            taken_at: clock.now(),
            temperature_c: temperature.celsius,
            pulse_bpm,
        };
        self.state.record_produced();

        let key = self.config.channel_write_key.clone();
        let drain = self.state.drain_buffer(&key, transport);
        let outcome = if drain.completed() {
            Some(uplink_reading(&reading, &key, transport))
        } else {
            None
        };
        match outcome {
            Some(o) if !o.keeps_reading() => {
                self.state.record_outcome(o);
                self.enter(Mode::Uploading, &mut modes);
            }
            _ => {
                self.state.enqueue(reading.clone());
                self.enter(Mode::Buffering, &mut modes);
            }
        }

        self.enter(Mode::Idle, &mut modes);
        self.cycle += 1;
        clock.advance_to_s(cycle_start_s + self.config.cycle_interval_s);
        debug_assert!(self.state.is_conserved());

        Ok(CycleReport {
            reading,
            replayed: drain.acked,
            outcome,
            modes,
        })
    }

    /// Runs every cycle that starts before `duration_s` of virtual time.
    pub fn run_for<B, T>(
        &mut self,
        clock: &VirtualClock,
        body: &B,
        transport: &mut T,
        duration_s: f64,
        mut on_cycle: impl FnMut(&Device, &CycleReport),
    ) -> Result<Vec<CycleReport>>
    where
        B: Body + ?Sized,
        T: Transport + ?Sized,
    {
        if !(duration_s >= 0.0 && duration_s.is_finite()) {
            return Err(Error::invalid("duration must be non-negative"));
        }
        let mut reports = Vec::new();
        while clock.elapsed_s() < duration_s {
            let report = self.run_cycle(clock, body, transport)?;
            on_cycle(self, &report);
            reports.push(report);
        }
        Ok(reports)
    }
}
