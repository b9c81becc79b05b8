use chrono::{DateTime, TimeZone, Utc};
use proptest::prelude::*;
use pulsecloud_server::store::seconds;
use pulsecloud_server::*;

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

#[derive(Debug, Clone)]
struct Op {
    dt_s: f64,
    good_key: bool,
    field: usize,
    value: f64,
    backdate_s: Option<f64>,
}

fn op() -> impl Strategy<Value = Op> {
    (0.0..40.0f64, prop::bool::weighted(0.85), 1usize..4, -50.0..150.0f64, prop::option::weighted(0.2, 0.0..60.0f64))
        .prop_map(|(dt_s, good_key, field, value, backdate_s)| Op { dt_s, good_key, field, value, backdate_s })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ingestion_invariants(ops in prop::collection::vec(op(), 1..60), min_interval in 0.0..30.0f64) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = StoreConfig { min_update_interval_s: min_interval, fsync: false, ..StoreConfig::new(dir.path()) };
        let store = Store::open(cfg.clone()).unwrap();
        let ch = store.create_channel("p", &["a", "b"], t0()).unwrap();

        let mut now = t0();
        let mut accepted = Vec::new();
        for op in &ops {
            now += seconds(op.dt_s);
            let key = if op.good_key { ch.write_key.as_str() } else { "NOTAKEY" };
            let at = op.backdate_s.map(|b| now - seconds(b));
            match store.handle_update(key, &[(op.field, op.value)], at, now) {
                Ok(id) => {
                    prop_assert!(op.good_key && op.field <= 2);
                    accepted.push(id);
                    // The returned id is the stored one.
                    let (_, last) = store.get_feeds(1, 1, Credential::ReadKey(&ch.read_key), now).unwrap();
                    prop_assert_eq!(last[0].entry_id, id);
                }
                Err(e) => prop_assert!([400, 401, 429].contains(&e.status())),
            }
        }

        let (_, feed) = store.get_feeds(1, usize::MAX, Credential::ReadKey(&ch.read_key), now).unwrap();
        let ids: Vec<u64> = feed.iter().map(|e| e.entry_id).collect();
        prop_assert_eq!(&ids, &(1..=accepted.len() as u64).collect::<Vec<_>>());
        prop_assert_eq!(&ids, &accepted);
        for w in feed.windows(2) {
            let gap = (w[1].created_at - w[0].created_at).num_microseconds().unwrap() as f64 / 1e6;
            prop_assert!(gap >= min_interval - 1e-6, "gap {} < {}", gap, min_interval);
        }

        let before = store.snapshot();
        drop(store);
        prop_assert_eq!(Store::open(cfg).unwrap().snapshot(), before);
    }

    #[test]
    fn no_data_without_a_valid_credential(key in "[A-Z0-9]{0,20}", token in "[a-f0-9]{0,64}") {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(StoreConfig { fsync: false, ..StoreConfig::new(dir.path()) }).unwrap();
        let ch = store.create_channel("p", &["a"], t0()).unwrap();
        store.handle_update(&ch.write_key, &[(1, 1.0)], None, t0()).unwrap();
        prop_assume!(key != ch.read_key && key != ch.write_key);
        prop_assert!(store.get_feeds(1, 10, Credential::ReadKey(&key), t0()).is_err());
        prop_assert!(store.get_feeds(1, 10, Credential::Session(&token), t0()).is_err());
        prop_assert!(store.get_feeds(1, 10, Credential::None, t0()).is_err());
    }
}
