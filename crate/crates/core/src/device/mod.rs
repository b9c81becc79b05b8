//! Wristband firmware simulation over a virtual clock.
//!
//! Every cycle the device samples, filters and computes vitals, then
//! uplinks them. Readings that cannot be delivered are kept in a bounded
//! FIFO and replayed, oldest first and with their original timestamps,
//! the next time the link is up.

mod clock;
mod config;
mod firmware;
mod state;
mod uplink;

pub use clock::VirtualClock;
pub use config::{DeviceConfig, OutageSchedule, PatientProfile};
pub use firmware::{Body, CycleReport, Device};
pub use state::{DeliveryStats, DeviceState, DrainReport, Mode};
pub use uplink::{
    format_timestamp, uplink_reading, OutageTransport, Transport, TransportError, UpdateRequest, UpdateResponse,
    UplinkOutcome, VitalsReading,
};
