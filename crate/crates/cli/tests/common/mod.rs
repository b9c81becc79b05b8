#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};
use pulsecloud_core::device::{Transport, TransportError, UpdateRequest, UpdateResponse};
use pulsecloud_server::{spawn, AppState, Channel, ManualClock, RunningServer, ServerClock, Store, StoreConfig, SystemClock};

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

/// A loopback server over a temp dir with one two-field channel.
pub struct Cloud {
    pub server: RunningServer,
    pub store: Arc<Store>,
    pub channel: Channel,
    pub dir: tempfile::TempDir,
}

pub fn store_config(dir: &Path, seed: u64, min_interval_s: f64) -> StoreConfig {
    StoreConfig {
        seed,
        min_update_interval_s: min_interval_s,
        fsync: false,
        ..StoreConfig::new(dir)
    }
}

pub fn cloud_with_clock(seed: u64, min_interval_s: f64, clock: Arc<dyn ServerClock>) -> Cloud {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(store_config(dir.path(), seed, min_interval_s)).unwrap();
    let channel = store.create_channel("patient-1", &["temperature_c", "pulse_bpm"], t0()).unwrap();
    let store = Arc::new(store);
    let server = spawn(AppState { store: store.clone(), clock }, "127.0.0.1:0".parse().unwrap()).unwrap();
    Cloud { server, store, channel, dir }
}

pub fn cloud(seed: u64) -> Cloud {
    cloud_with_clock(seed, 15.0, Arc::new(SystemClock))
}

pub fn manual_cloud(seed: u64) -> (Cloud, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(t0()));
    (cloud_with_clock(seed, 15.0, clock.clone()), clock)
}

/// Delivers updates straight into a store, skipping HTTP.
pub struct StoreLink<'a>(pub &'a Store);

impl Transport for StoreLink<'_> {
    fn send_update(&mut self, req: &UpdateRequest) -> Result<UpdateResponse, TransportError> {
        let fields: Vec<(usize, f64)> = req.fields.iter().map(|&(i, v)| (i as usize, v)).collect();
        let now = req.created_at.unwrap_or_else(t0);
        Ok(match self.0.handle_update(&req.api_key, &fields, req.created_at, now) {
            Ok(id) => UpdateResponse { status: 200, body: id.to_string() },
            Err(e) => UpdateResponse { status: e.status(), body: "0".into() },
        })
    }
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pulsecloud"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).env("RUST_LOG", "warn").output().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}
