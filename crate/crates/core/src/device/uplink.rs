//! Device side of the channel-update wire protocol.

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{OutageSchedule, VirtualClock};

/// One timestamped vitals pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitalsReading {
    pub taken_at: DateTime<Utc>,
    pub temperature_c: f64,
    /// `None` marks a capture in which no pulse was found.
    pub pulse_bpm: Option<f64>,
}

/// `/update` parameters for one reading.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRequest {
    pub api_key: String,
    /// `(field index, value)`, indices from 1.
    pub fields: Vec<(u8, f64)>,
    pub created_at: Option<DateTime<Utc>>,
}

impl UpdateRequest {
    /// field1 = temperature, field2 = pulse (omitted when absent), stamped
    /// with the reading's own time.
    pub fn for_reading(r: &VitalsReading, api_key: &str) -> Self {
        let mut fields = vec![(1, r.temperature_c)];
        if let Some(bpm) = r.pulse_bpm {
            fields.push((2, bpm));
        }
        Self {
            api_key: api_key.to_owned(),
            fields,
            created_at: Some(r.taken_at),
        }
    }

    /// Query/form pairs in wire order.
    pub fn params(&self) -> Vec<(String, String)> {
        let mut out = vec![("api_key".to_owned(), self.api_key.clone())];
        for &(k, v) in &self.fields {
            out.push((format!("field{k}"), v.to_string()));
        }
        if let Some(ts) = self.created_at {
            out.push(("created_at".to_owned(), format_timestamp(ts)));
        }
        out
    }
}

/// ISO-8601 UTC with a `Z` suffix and only as many fractional digits as needed.
pub fn format_timestamp(ts: DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("link down")]
    LinkDown,
    #[error("network error: {0}")]
    Network(String),
}

/// Something that can carry one `/update` request to the cloud.
pub trait Transport {
    fn send_update(&mut self, req: &UpdateRequest) -> Result<UpdateResponse, TransportError>;
}

impl<T: Transport + ?Sized> Transport for &mut T {
    fn send_update(&mut self, req: &UpdateRequest) -> Result<UpdateResponse, TransportError> {
        (**self).send_update(req)
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send_update(&mut self, req: &UpdateRequest) -> Result<UpdateResponse, TransportError> {
        (**self).send_update(req)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UplinkOutcome {
    Ack(u64),
    /// Key or payload refused; resending cannot help.
    Rejected,
    /// Server asked us to slow down; keep the reading and retry later.
    RateLimited,
    Unreachable,
}

impl UplinkOutcome {
    pub fn classify(resp: &UpdateResponse) -> Self {
        match resp.status {
            200 => match resp.body.trim().parse::<u64>() {
                Ok(id) if id >= 1 => UplinkOutcome::Ack(id),
                _ => UplinkOutcome::Rejected,
            },
            429 => UplinkOutcome::RateLimited,
            500..=599 => UplinkOutcome::Unreachable,
            _ => UplinkOutcome::Rejected,
        }
    }

    /// Whether the reading should stay in (or go into) the local buffer.
    pub fn keeps_reading(&self) -> bool {
        matches!(self, UplinkOutcome::RateLimited | UplinkOutcome::Unreachable)
    }
}

/// Sends one reading as a channel update and classifies the result.
pub fn uplink_reading<T: Transport + ?Sized>(r: &VitalsReading, write_key: &str, transport: &mut T) -> UplinkOutcome {
    match transport.send_update(&UpdateRequest::for_reading(r, write_key)) {
        Ok(resp) => UplinkOutcome::classify(&resp),
        Err(_) => UplinkOutcome::Unreachable,
    }
}

/// Wraps a transport and fails every send while the virtual clock is
/// inside a scheduled outage.
pub struct OutageTransport<T> {
    inner: T,
    schedule: OutageSchedule,
    clock: VirtualClock,
}

impl<T> OutageTransport<T> {
    pub fn new(inner: T, schedule: OutageSchedule, clock: VirtualClock) -> Self {
        Self { inner, schedule, clock }
    }

    pub fn into_inner(self) -> T {
        self.inner
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }
}

impl<T: Transport> Transport for OutageTransport<T> {
    fn send_update(&mut self, req: &UpdateRequest) -> Result<UpdateResponse, TransportError> {
        if self.schedule.is_down(self.clock.elapsed_s()) {
            return Err(TransportError::LinkDown);
        }
        self.inner.send_update(req)
    }
}
