use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::uplink::{uplink_reading, Transport, UplinkOutcome, VitalsReading};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Idle,
    Sampling,
    Processing,
    Uploading,
    Buffering,
}

impl Mode {
    /// The only legal transitions: idle → sampling → processing →
    /// (uploading | buffering) → idle.
    pub fn can_enter(self, next: Mode) -> bool {
        use Mode::*;
        matches!(
            (self, next),
            (Idle, Sampling)
                | (Sampling, Processing)
                | (Processing, Uploading)
                | (Processing, Buffering)
                | (Uploading, Idle)
                | (Buffering, Idle)
        )
    }
}

/// Running totals over a device's lifetime.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryStats {
    pub produced: u64,
    pub acked: u64,
    pub rejected: u64,
}

/// Mode, store-and-forward buffer and counters.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    mode: Mode,
    buffer: VecDeque<VitalsReading>,
    capacity: usize,
    dropped_count: u64,
    stats: DeliveryStats,
}

impl DeviceState {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity < 1 {
            return Err(Error::invalid("buffer capacity must be at least 1"));
        }
        Ok(Self {
            mode: Mode::Idle,
            buffer: VecDeque::with_capacity(capacity),
            capacity,
            dropped_count: 0,
            stats: DeliveryStats::default(),
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn buffer(&self) -> &VecDeque<VitalsReading> {
        &self.buffer
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dropped_count(&self) -> u64 {
        self.dropped_count
    }

    pub fn stats(&self) -> DeliveryStats {
        self.stats
    }

    /// `produced == acked + rejected + buffered + dropped`.
    pub fn is_conserved(&self) -> bool {
        self.stats.produced
            == self.stats.acked + self.stats.rejected + self.buffer.len() as u64 + self.dropped_count
    }

    pub(crate) fn transition(&mut self, next: Mode) {
        assert!(
            self.mode.can_enter(next),
            "illegal transition {:?} -> {:?}",
            self.mode,
            next
        );
        self.mode = next;
    }

    pub(crate) fn record_produced(&mut self) {
        self.stats.produced += 1;
    }

    pub(crate) fn record_outcome(&mut self, outcome: UplinkOutcome) {
        match outcome {
            UplinkOutcome::Ack(_) => self.stats.acked += 1,
            UplinkOutcome::Rejected => self.stats.rejected += 1,
            UplinkOutcome::RateLimited | UplinkOutcome::Unreachable => {}
        }
    }

    /// Appends a reading, evicting the oldest one when full.
    pub fn enqueue(&mut self, r: VitalsReading) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
            self.dropped_count += 1;
        }
        self.buffer.push_back(r);
    }

    /// Sends buffered readings oldest-first with their original timestamps.
    ///
    /// A reading leaves the buffer once the server has answered it: acked,
    /// or rejected (resending a refused reading cannot succeed). The drain
    /// stops at the first reading that is not acknowledged.
    pub fn drain_buffer<T: Transport + ?Sized>(&mut self, write_key: &str, uplink: &mut T) -> DrainReport {
        let mut report = DrainReport::default();
        while let Some(front) = self.buffer.front() {
            let outcome = uplink_reading(front, write_key, uplink);
            if !outcome.keeps_reading() {
                self.buffer.pop_front();
                self.record_outcome(outcome);
            }
            match outcome {
                UplinkOutcome::Ack(id) => report.acked.push(id),
                other => {
                    report.stopped_on = Some(other);
                    break;
                }
            }
        }
        report
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DrainReport {
    /// Entry ids assigned to the readings that went through, in order.
    pub acked: Vec<u64>,
    pub stopped_on: Option<UplinkOutcome>,
}

impl DrainReport {
    pub fn completed(&self) -> bool {
        self.stopped_on.is_none()
    }
}
