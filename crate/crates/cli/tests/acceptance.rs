//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.
//!
//! ```text
//! cargo test -p pulsecloud --test acceptance
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use chrono::Duration;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRng, TestRunner};
use pulsecloud_core::device::{Device, DeviceConfig, OutageSchedule, OutageTransport, PatientProfile};
use pulsecloud_core::sensors::Ds18b20Model;
use pulsecloud_core::signal::*;
use pulsecloud_core::Adc;
use pulsecloud_server::{spawn, AppState, Store};

use common::*;

// Tolerances.
const PUBLISHED_SCALE: f64 = 10.41909;
const SCALE_TOL: f64 = 1e-5;
const REFERENCE_BPM: f64 = 77.0;
const SCALED_BPM_TOL: f64 = 0.01;
const BPM_FORMULA_REL_TOL: f64 = 1e-9;
const RECOVERY_TOL_CLEAN: f64 = 2.0;
const RECOVERY_TOL_NOISY: f64 = 3.0;
const NOISY_RMS_V: f64 = 0.02;
const NOISY_DC_V: f64 = 1.0;
const DS18B20_ACCURACY_C: f64 = 0.5;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

fn c1_calibration() -> Outcome {
    let device: Vec<f64> = [-2.17, 2.17, -0.37, 0.37, -2.42, 2.42, 0.0, 0.0, 0.73, -0.73]
        .iter()
        .map(|d| 802.27 + d)
        .collect();
    let reference: Vec<f64> = [-1.0, 1.0, 0.0, 0.0, -2.0, 2.0, 1.0, -1.0, 0.0, 0.0]
        .iter()
        .map(|d| 77.0 + d)
        .collect();
    let rec = calibrate_scale(&device, &reference).map_err(|e| e.to_string())?;
    ensure!((rec.device_mean - 802.27).abs() < 1e-9, "device mean {}", rec.device_mean);
    ensure!((rec.reference_mean - 77.0).abs() < 1e-9, "reference mean {}", rec.reference_mean);
    ensure!(
        (rec.scaling_factor - PUBLISHED_SCALE).abs() <= SCALE_TOL,
        "S = {} vs {PUBLISHED_SCALE}",
        rec.scaling_factor
    );
    let bpm = apply_scale(802.27, &rec).map_err(|e| e.to_string())?;
    ensure!((bpm - REFERENCE_BPM).abs() <= SCALED_BPM_TOL, "apply_scale(802.27) = {bpm}");

    // Same numbers through the command line.
    let dir = tempfile::tempdir().unwrap();
    let lines = |v: &[f64]| v.iter().map(|x| format!("{x}\n")).collect::<String>();
    let d = write(dir.path(), "device.txt", &lines(&device));
    let r = write(dir.path(), "reference.txt", &lines(&reference));
    let out = run(&["calibrate", "--device", &d, "--reference", &r]);
    ensure!(out.status.code() == Some(0), "calibrate exited {:?}", out.status.code());
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).map_err(|e| e.to_string())?;
    let s = json["scaling_factor"].as_f64().unwrap_or(f64::NAN);
    ensure!((s - PUBLISHED_SCALE).abs() <= SCALE_TOL, "cli S = {s}");
    Ok(format!("S = {:.7}, 802.27 -> {bpm:.4} BPM", rec.scaling_factor))
}

fn c2_bpm_formula() -> Outcome {
    let mut worst = 0.0f64;
    for f in [0.8, 1.0, 1.28, 2.0, 3.0] {
        let times: Vec<f64> = (0..25).map(|k| k as f64 / f).collect();
        let bpm = estimate_bpm(&PeakTrain::new(times).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let rel = (bpm - 60.0 * f).abs() / (60.0 * f);
        ensure!(rel <= BPM_FORMULA_REL_TOL, "F = {f}: {bpm} vs {}", 60.0 * f);
        worst = worst.max(rel);
    }
    Ok(format!("worst relative error {worst:.1e}"))
}

fn c3_pipeline_recovery() -> Outcome {
    let adc = Adc::default();
    let pipe = PulsePipeline::default();
    let chain = |w: &PpgWaveform<f64>| -> Result<f64, String> {
        let digitized = adc.requantize(w).map_err(|e| e.to_string())?;
        pipe.estimate(&digitized).map_err(|e| e.to_string())
    };
    let (mut worst_clean, mut worst_noisy) = (0.0f64, 0.0f64);
    for bpm in 50..=180 {
        let b = bpm as f64;
        let clean = synthesize_ppg(b, 30.0, 50.0, NOISY_DC_V, 0.0, 0.0, 0).map_err(|e| e.to_string())?;
        let err = (chain(&clean).map_err(|e| format!("{bpm} BPM clean: {e}"))? - b).abs();
        ensure!(err <= RECOVERY_TOL_CLEAN, "{bpm} BPM clean: error {err}");
        worst_clean = worst_clean.max(err);

        let noisy = synthesize_ppg(b, 30.0, 50.0, NOISY_DC_V, NOISY_RMS_V, 0.0, 1000 + bpm)
            .map_err(|e| e.to_string())?;
        let err = (chain(&noisy).map_err(|e| format!("{bpm} BPM noisy: {e}"))? - b).abs();
        ensure!(err <= RECOVERY_TOL_NOISY, "{bpm} BPM noisy: error {err}");
        worst_noisy = worst_noisy.max(err);
    }
    Ok(format!("worst error {worst_clean:.3} BPM clean, {worst_noisy:.3} BPM noisy"))
}

fn post_warmup_peaks(w: &PpgWaveform<f64>) -> Vec<f64> {
    let pipe = PulsePipeline::default();
    pipe.analyze(w).unwrap().peaks.after(pipe.warmup_s).times().to_vec()
}

fn c4_invariance() -> Outcome {
    let wave = (40.0..200.0f64, 0.0..0.05f64, any::<u64>())
        .prop_map(|(bpm, noise, seed)| synthesize_ppg(bpm, 20.0, 50.0, 1.0, noise, 0.0, seed).unwrap());
    let strategy = (wave, -50.0..50.0f64, 1e-3..1e3f64);
    runner(200)
        .run(&strategy, |(w, offset, gain)| {
            let base = post_warmup_peaks(&w);
            prop_assert!(base.len() >= 10);
            prop_assert_eq!(&post_warmup_peaks(&w.map(|v| v + offset).unwrap()), &base, "offset {}", offset);
            prop_assert_eq!(&post_warmup_peaks(&w.map(|v| v * gain).unwrap()), &base, "gain {}", gain);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("200 waveforms, offsets in [-50, 50] V, gains in [1e-3, 1e3]".into())
}

fn c5_ds18b20() -> Outcome {
    // Clamping and the register identity, noise on, every resolution.
    let mut checked = 0;
    runner(1000)
        .run(&(-300.0..300.0f64, 9u8..=12, any::<u64>()), |(t, bits, seed)| {
            let mut m = Ds18b20Model::<f64>::new(bits, 125.0, -55.0, seed).unwrap();
            let r = m.convert_t(t).unwrap();
            prop_assert!((-55.0..=125.0).contains(&r.celsius), "{} -> {}", t, r.celsius);
            prop_assert_eq!(r.raw16 as f64, 16.0 * r.celsius);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    checked += 1000;

    // Noise-free grid.
    for (bits, step) in [(12u8, 0.0625), (9, 0.5)] {
        let mut m = Ds18b20Model::<f64>::new(bits, 125.0, -55.0, 0).unwrap().without_noise();
        ensure!(m.step_c() == step, "{bits}-bit step_c {}", m.step_c());
        let mut outputs: Vec<f64> = (0..=180_000).map(|i| m.convert_t(-55.0 + i as f64 * 0.001).unwrap().celsius).collect();
        outputs.dedup();
        ensure!(outputs.windows(2).all(|w| w[1] - w[0] == step), "{bits}-bit grid is not uniformly {step}");
        ensure!(outputs[0] == -55.0 && *outputs.last().unwrap() == 125.0, "{bits}-bit grid ends");
    }

    // Accuracy inside the specified band.
    runner(1000)
        .run(&(-10.0..=85.0f64, 9u8..=12, any::<u64>()), |(t, bits, seed)| {
            let mut m = Ds18b20Model::<f64>::new(bits, 125.0, -55.0, seed).unwrap();
            let step = m.step_c();
            let r = m.convert_t(t).unwrap();
            prop_assert!((r.celsius - t).abs() <= DS18B20_ACCURACY_C + step, "{} -> {}", t, r.celsius);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    checked += 1000;
    Ok(format!("{checked} random conversions, 12-bit and 9-bit grids swept"))
}

fn c6_store_and_forward() -> Outcome {
    // Fixed scenario over real HTTP: the link is down from 1.5 h to 2.5 h.
    let cloud = cloud(6);
    let mut cfg = DeviceConfig::new(cloud.channel.write_key.clone());
    cfg.server_url = cloud.server.url();
    let start = cfg.start_time;
    let window = cfg.ppg_window_s;
    let body = cfg.patient.clone();
    let mut dev = Device::new(cfg).map_err(|e| e.to_string())?;
    let clock = dev.clock();
    let outage = OutageSchedule::new(vec![(5400.0, 9000.0)]).map_err(|e| e.to_string())?;
    let mut link = OutageTransport::new(pulsecloud::HttpTransport::new(&cloud.server.url()), outage, clock.clone());
    let reports = dev.run_for(&clock, &body, &mut link, 21_600.0, |_, _| {}).map_err(|e| e.to_string())?;
    ensure!(reports.len() == 12, "{} cycles", reports.len());
    ensure!(reports.iter().any(|r| !r.replayed.is_empty()), "the outage never buffered anything");
    let st = dev.state();
    ensure!(st.stats().produced == 12 && st.stats().acked == 12, "stats {:?}", st.stats());
    ensure!(st.buffer().is_empty() && st.dropped_count() == 0, "left over or dropped");

    let feed = &cloud.store.snapshot()[0].1;
    ensure!(feed.len() == 12, "server holds {} entries", feed.len());
    for (k, e) in feed.iter().enumerate() {
        let expected = start + Duration::seconds(1800 * k as i64) + Duration::seconds(window as i64);
        ensure!(e.created_at == expected, "entry {} stamped {} not {}", e.entry_id, e.created_at, expected);
    }

    // Conservation at every cycle over random outage schedules.
    let schedule = prop::collection::vec((0.0..40_000.0f64, 1.0..30_000.0f64), 0..5)
        .prop_map(|v| v.into_iter().map(|(a, len)| (a, a + len)).collect::<Vec<_>>());
    runner(100)
        .run(&(schedule, 1usize..8), |(intervals, capacity)| {
            let dir = tempfile::tempdir().unwrap();
            let store = Store::open(store_config(dir.path(), 1, 15.0)).unwrap();
            let ch = store.create_channel("p", &["temperature_c", "pulse_bpm"], t0()).unwrap();
            let mut cfg = DeviceConfig::new(ch.write_key);
            cfg.buffer_capacity = capacity;
            let mut dev = Device::new(cfg).unwrap();
            let clock = dev.clock();
            let mut link = OutageTransport::new(StoreLink(&store), OutageSchedule::new(intervals).unwrap(), clock.clone());
            let mut broken = None;
            dev.run_for(&clock, &PatientProfile::default(), &mut link, 43_200.0, |d, _| {
                let st = d.state();
                let s = st.stats();
                let rhs = s.acked + st.buffer().len() as u64 + st.dropped_count();
                if broken.is_none() && (s.produced != rhs || s.rejected != 0) {
                    broken = Some(format!("produced {} != acked {} + buffered {} + dropped {}", s.produced, s.acked, st.buffer().len(), st.dropped_count()));
                }
            })
            .unwrap();
            prop_assert!(broken.is_none(), "{}", broken.unwrap());
            prop_assert_eq!(store.entry_count(1).unwrap() as u64, dev.state().stats().acked);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("12/12 delivered in order with original timestamps; 100 random schedules conserved".into())
}

fn http_get(url: &str) -> (u16, String) {
    let mut r = pulsecloud::transport::agent().get(url).call().unwrap();
    (r.status().as_u16(), r.body_mut().read_to_string().unwrap())
}

fn c7_wire_contract() -> Outcome {
    let (cloud, clock) = manual_cloud(0);
    let base = cloud.server.url();
    let key = cloud.channel.write_key.clone();
    let update = |q: &str| http_get(&format!("{base}/update?api_key={key}&{q}"));

    ensure!(update("field1=36.6&field2=77") == (200, "1".into()), "first update");
    clock.advance(Duration::seconds(1));
    let r = update("field1=36.6&field2=77");
    ensure!(r == (429, "0".into()), "1 s later gave {r:?}");
    let r = http_get(&format!("{base}/update?api_key=WRONG&field1=1"));
    ensure!(r == (401, "0".into()), "bad key gave {r:?}");
    clock.advance(Duration::seconds(14));
    ensure!(update("field1=36.8&field2=76.5") == (200, "2".into()), "second update");

    let rk = &cloud.channel.read_key;
    let golden = include_str!("golden/feeds.json").trim_end();
    let (status, body) = http_get(&format!("{base}/channels/1/feeds.json?results=2&api_key={rk}"));
    ensure!(status == 200 && body == golden, "feeds.json differs from golden:\n{body}\n{golden}");

    let mut ids = vec![1, 2];
    for i in 3..=50u64 {
        clock.advance(Duration::seconds(15));
        let (status, body) = update(&format!("field1=36.{}&field2={}", i % 10, 60 + i));
        ensure!(status == 200, "update {i}: {status}");
        ids.push(body.parse::<u64>().map_err(|e| format!("update {i} body {body:?}: {e}"))?);
    }
    ensure!(ids == (1..=50).collect::<Vec<_>>(), "entry ids {ids:?}");

    let feeds_url = |base: &str| format!("{base}/channels/1/feeds.json?results=100&api_key={rk}");
    let before_doc = http_get(&feeds_url(&base));
    let before = cloud.store.snapshot();
    let common::Cloud { server, store, dir, .. } = cloud;
    server.shutdown().map_err(|e| e.to_string())?;
    drop(store);

    let store = Store::open(store_config(dir.path(), 0, 15.0)).map_err(|e| e.to_string())?;
    ensure!(store.snapshot() == before, "reloaded state differs");
    let server = spawn(AppState { store: store.into(), clock: clock.clone() }, "127.0.0.1:0".parse().unwrap())
        .map_err(|e| e.to_string())?;
    let after_doc = http_get(&feeds_url(&server.url()));
    ensure!(after_doc == before_doc, "feeds.json changed across restart");
    clock.advance(Duration::seconds(15));
    let r = http_get(&format!("{}/update?api_key={key}&field1=37", server.url()));
    ensure!(r == (200, "51".into()), "first update after restart gave {r:?}");
    Ok("ids 1..50, 401/429 bodies \"0\", golden feeds.json, restart identical".into())
}

fn c8_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let outages = write(dir.path(), "outages.json", "[[3600, 9000], [14000, 15000]]");
    let run_once = || -> Result<(String, String), String> {
        let cloud = cloud(8);
        let config = serde_json::json!({
            "channel_write_key": cloud.channel.write_key,
            "seed": 99,
            "patient": { "noise_rms_v": 0.02, "drift_v_per_s": 0.001 }
        });
        let cfg = write(cloud.dir.path(), "device.json", &config.to_string());
        let url = cloud.server.url();
        let sim = run(&["simulate", "--config", &cfg, "--duration", "21600", "--outages", &outages, "--server-url", &url]);
        ensure!(sim.status.code() == Some(0), "simulate exited {:?}: {}", sim.status.code(), String::from_utf8_lossy(&sim.stderr));
        let exp = run(&[
            "export", "--channel-id", "1", "--results", "1000", "--read-key", &cloud.channel.read_key, "--server-url", &url,
        ]);
        ensure!(exp.status.code() == Some(0), "export exited {:?}", exp.status.code());
        Ok((stdout(&sim), stdout(&exp)))
    };
    let (sim_a, csv_a) = run_once()?;
    let (sim_b, csv_b) = run_once()?;
    ensure!(sim_a == sim_b, "summaries differ: {sim_a} vs {sim_b}");
    ensure!(csv_a.as_bytes() == csv_b.as_bytes(), "exported CSVs differ");
    let rows = csv_a.lines().count() - 1;
    ensure!(rows == 12, "{rows} rows exported");
    Ok(format!("{rows} rows, {} bytes identical", csv_a.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("calibration reproduction", c1_calibration),
        ("BPM formula", c2_bpm_formula),
        ("pipeline recovery", c3_pipeline_recovery),
        ("DC/amplitude invariance", c4_invariance),
        ("DS18B20 fidelity", c5_ds18b20),
        ("store-and-forward", c6_store_and_forward),
        ("wire contract", c7_wire_contract),
        ("determinism", c8_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {}. {name} ({detail}) [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}. {name}: {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    let _ = panic::take_hook();
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
