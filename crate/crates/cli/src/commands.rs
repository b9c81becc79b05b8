use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use pulsecloud_core::device::{Device, DeviceConfig, OutageSchedule, OutageTransport};
use pulsecloud_core::signal::{apply_scale, calibrate_scale, FilterSpec, PeakDetector, PulsePipeline};
use pulsecloud_core::{Calibration, Waveform};
use pulsecloud_server::{AppState, Store, StoreConfig, SystemClock};
use serde_json::{json, Value};

use crate::transport::{agent, HttpTransport};
use crate::{CalibrateArgs, CliError, CliResult, ExportArgs, PipelineArgs, ServeArgs, SimulateArgs};

pub const CHANNEL_FIELDS: [&str; 2] = ["temperature_c", "pulse_bpm"];
pub const EXPORT_HEADER: [&str; 3] = ["created_at", "temperature_c", "pulse_bpm"];

fn emit(out: &mut dyn Write, v: &Value) -> CliResult<()> {
    writeln!(out, "{v}")?;
    out.flush()?;
    Ok(())
}

fn input_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

/// Parses `USER:PASSWORD:ID[,ID...]`. The password may contain colons.
pub fn parse_user_spec(spec: &str) -> CliResult<(String, String, Vec<u64>)> {
    let bad = || CliError::Input(format!("bad --user {spec:?}, expected USER:PASSWORD:ID[,ID...]"));
    let (user, rest) = spec.split_once(':').ok_or_else(bad)?;
    let (pass, ids) = rest.rsplit_once(':').ok_or_else(bad)?;
    let ids = ids
        .split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| bad())?;
    if user.is_empty() {
        return Err(bad());
    }
    Ok((user.to_string(), pass.to_string(), ids))
}

/// Opens the store, creates missing channels and registers users.
pub fn prepare_store(a: &ServeArgs) -> CliResult<Store> {
    let cfg = StoreConfig {
        data_dir: a.data_dir.clone(),
        min_update_interval_s: a.min_update_interval,
        session_ttl_s: a.session_ttl,
        seed: a.seed,
        fsync: a.fsync,
    };
    let mut store = Store::open(cfg).map_err(|e| CliError::Input(e.to_string()))?;
    for name in &a.channels {
        if !store.channels().iter().any(|c| &c.name == name) {
            store
                .create_channel(name, &CHANNEL_FIELDS, chrono::Utc::now())
                .map_err(|e| CliError::Input(e.to_string()))?;
        }
    }
    for spec in &a.users {
        let (user, pass, ids) = parse_user_spec(spec)?;
        store.add_user(&user, &pass, ids).map_err(|e| CliError::Input(e.to_string()))?;
    }
    Ok(store)
}

pub fn serve(a: &ServeArgs, out: &mut dyn Write) -> CliResult<()> {
    let store = prepare_store(a)?;
    let channels: Vec<Value> = store
        .channels()
        .iter()
        .map(|c| json!({"id": c.id, "name": c.name, "write_key": c.write_key, "read_key": c.read_key}))
        .collect();
    let state = AppState { store: Arc::new(store), clock: Arc::new(SystemClock) };
    let mut startup = Ok(());
    let res = pulsecloud_server::serve_blocking(state, a.listen, |addr| {
        log::info!("listening on {addr}");
        startup = emit(out, &json!({"listening": format!("http://{addr}"), "channels": channels}));
    });
    startup?;
    res.map_err(|e| CliError::Input(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationSummary {
    pub produced: u64,
    pub acked: u64,
    pub rejected: u64,
    pub buffered: u64,
    pub dropped: u64,
}

impl SimulationSummary {
    pub fn to_json(self) -> Value {
        json!({
            "produced": self.produced,
            "acked": self.acked,
            "buffered": self.buffered,
            "dropped": self.dropped,
            "rejected": self.rejected,
        })
    }
}

/// Runs the device loop against a live server and reports delivery counts.
pub fn run_simulation(
    config: DeviceConfig,
    duration_s: f64,
    outages: OutageSchedule,
) -> CliResult<SimulationSummary> {
    let body = config.patient.clone();
    let link = HttpTransport::new(&config.server_url);
    let mut device = Device::new(config)?;
    let clock = device.clock();
    let mut transport = OutageTransport::new(link, outages, clock.clone());
    device.run_for(&clock, &body, &mut transport, duration_s, |d, rep| {
        log::info!(
            "t={:.0}s temperature={:.4} bpm={:?} outcome={:?} replayed={} buffered={}",
            rep.reading.taken_at.signed_duration_since(d.config().start_time).num_seconds(),
            rep.reading.temperature_c,
            rep.reading.pulse_bpm,
            rep.outcome,
            rep.replayed.len(),
            d.state().buffer().len(),
        );
    })?;
    let st = device.state();
    let stats = st.stats();
    Ok(SimulationSummary {
        produced: stats.produced,
        acked: stats.acked,
        rejected: stats.rejected,
        buffered: st.buffer().len() as u64,
        dropped: st.dropped_count(),
    })
}

pub fn simulate(a: &SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    if !(a.duration.is_finite() && a.duration >= 0.0) {
        return Err(CliError::Input(format!("--duration must be non-negative, got {}", a.duration)));
    }
    let mut config = DeviceConfig::load(&a.config).map_err(|e| input_err(&a.config, e))?;
    if let Some(url) = &a.server_url {
        config.server_url = url.clone();
    }
    let outages = match &a.outages {
        Some(p) => OutageSchedule::load(p).map_err(|e| input_err(p, e))?,
        None => OutageSchedule::none(),
    };
    let summary = run_simulation(config, a.duration, outages)?;
    if summary.dropped > 0 {
        log::warn!("{} readings dropped on buffer overflow", summary.dropped);
    }
    emit(out, &summary.to_json())
}

pub fn pipeline(a: &PipelineArgs, out: &mut dyn Write) -> CliResult<()> {
    let file = fs::File::open(&a.input).map_err(|e| input_err(&a.input, e))?;
    let wave = Waveform::read_csv(std::io::BufReader::new(file)).map_err(|e| input_err(&a.input, e))?;
    let pipe = PulsePipeline {
        filter: FilterSpec {
            hp_cutoff_hz: a.hp_cutoff,
            lp_cutoff_hz: a.lp_cutoff,
            stages_per_side: a.stages,
        },
        detector: PeakDetector { refractory_ms: a.refractory_ms, ..PeakDetector::default() },
        warmup_s: a.warmup_s,
    };
    let analysis = pipe.analyze(&wave)?;
    let mut report = json!({"peaks": analysis.peaks.len(), "bpm": analysis.bpm});
    if let Some(s) = a.scale {
        if !(s.is_finite() && s > 0.0) {
            return Err(CliError::Input(format!("--scale must be positive, got {s}")));
        }
        let record = Calibration::from_means(s, 1.0)?;
        let scaled = analysis.bpm.map(|b| apply_scale(b, &record)).transpose()?;
        report["scaled_bpm"] = json!(scaled);
    }
    emit(out, &report)
}

/// One number per line; blank lines are skipped.
pub fn read_readings(path: &Path) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| input_err(path, e))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => return Err(input_err(path, format!("line {}: not a number: {line:?}", i + 1))),
        }
    }
    if values.is_empty() {
        return Err(input_err(path, "no readings"));
    }
    Ok(values)
}

pub fn calibrate(a: &CalibrateArgs, out: &mut dyn Write) -> CliResult<()> {
    let device = read_readings(&a.device)?;
    let reference = read_readings(&a.reference)?;
    let rec = calibrate_scale(&device, &reference)?;
    emit(out, &serde_json::to_value(rec).map_err(|e| CliError::Input(e.to_string()))?)
}

/// Fetches the last `results` entries and writes them as CSV rows.
pub fn export_csv(server_url: &str, channel_id: u64, results: usize, read_key: &str, out: &mut dyn Write) -> CliResult<()> {
    let url = format!("{}/channels/{channel_id}/feeds.json", server_url.trim_end_matches('/'));
    let results = results.to_string();
    let mut resp = agent()
        .get(&url)
        .query("results", &results)
        .query("api_key", read_key)
        .call()
        .map_err(|e| CliError::Remote(format!("{url}: {e}")))?;
    let status = resp.status().as_u16();
    let body = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| CliError::Remote(format!("{url}: {e}")))?;
    match status {
        200 => {}
        401 => return Err(CliError::Remote(format!("{url}: read key refused (401)"))),
        404 => return Err(CliError::Remote(format!("{url}: no channel {channel_id} (404)"))),
        s => return Err(CliError::Remote(format!("{url}: HTTP {s}: {body}"))),
    }
    let doc: Value = serde_json::from_str(&body).map_err(|e| CliError::Remote(format!("{url}: bad JSON: {e}")))?;
    let feeds = doc["feeds"]
        .as_array()
        .ok_or_else(|| CliError::Remote(format!("{url}: response has no feeds")))?;

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |e: csv::Error| CliError::Input(e.to_string());
    w.write_record(EXPORT_HEADER).map_err(csv_err)?;
    for row in feeds {
        let cell = |k: &str| row[k].as_str().unwrap_or("").to_string();
        w.write_record([cell("created_at"), cell("field1"), cell("field2")]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export(a: &ExportArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.results == 0 {
        return Err(CliError::Input("--results must be at least 1".into()));
    }
    export_csv(&a.server_url, a.channel_id, a.results, &a.read_key, out)
}
