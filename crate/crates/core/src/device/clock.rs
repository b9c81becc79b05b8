use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};

/// Manually advanced simulation clock with microsecond resolution.
///
/// Clones share the same counter, so a transport can observe the time the
/// device loop has advanced to.
#[derive(Debug, Clone)]
pub struct VirtualClock {
    origin: DateTime<Utc>,
    elapsed_us: Arc<AtomicU64>,
}

impl VirtualClock {
    pub fn new(origin: DateTime<Utc>) -> Self {
        Self {
            origin,
            elapsed_us: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn origin(&self) -> DateTime<Utc> {
        self.origin
    }

    pub fn elapsed_us(&self) -> u64 {
        self.elapsed_us.load(Ordering::Acquire)
    }

    /// Seconds since the origin.
    pub fn elapsed_s(&self) -> f64 {
        self.elapsed_us() as f64 / 1e6
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.at(self.elapsed_s())
    }

    /// Wall time `seconds` after the origin.
    pub fn at(&self, seconds: f64) -> DateTime<Utc> {
        self.origin + chrono::Duration::microseconds((seconds * 1e6).round() as i64)
    }

    pub fn advance_s(&self, seconds: f64) {
        assert!(seconds >= 0.0, "virtual clock cannot run backwards");
        self.elapsed_us.fetch_add(seconds_to_us(seconds), Ordering::AcqRel);
    }

    /// Moves to `seconds` after the origin. Earlier targets are ignored.
    pub fn advance_to_s(&self, seconds: f64) {
        self.elapsed_us.fetch_max(seconds_to_us(seconds), Ordering::AcqRel);
    }
}

fn seconds_to_us(seconds: f64) -> u64 {
    (seconds * 1e6).round() as u64
}
