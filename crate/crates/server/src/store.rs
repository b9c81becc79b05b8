use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Duration, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::auth::Accounts;
use crate::model::{self, Channel, FeedEntry, MAX_FIELDS};
use crate::storage::{self, FeedWriter};
use crate::{Error, Result};

/// Why an update was refused. The wire body is always `0`.
#[derive(Debug, Clone, PartialEq)]
pub enum UpdateError {
    UnknownKey,
    BadRequest(String),
    RateLimited { since_last_s: f64, min_interval_s: f64 },
    Storage(String),
}

impl UpdateError {
    pub fn status(&self) -> u16 {
        match self {
            UpdateError::UnknownKey => 401,
            UpdateError::BadRequest(_) => 400,
            UpdateError::RateLimited { .. } => 429,
            UpdateError::Storage(_) => 500,
        }
    }
}

impl std::fmt::Display for UpdateError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UpdateError::UnknownKey => write!(f, "unknown write key"),
            UpdateError::BadRequest(m) => write!(f, "bad request: {m}"),
            UpdateError::RateLimited { since_last_s, min_interval_s } => {
                write!(f, "rate limited: {since_last_s}s since last entry, minimum {min_interval_s}s")
            }
            UpdateError::Storage(m) => write!(f, "storage failure: {m}"),
        }
    }
}

impl std::error::Error for UpdateError {}

/// A parsed `/update` request.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateParams {
    pub api_key: String,
    /// 1-based field index and value.
    pub fields: Vec<(usize, f64)>,
    pub created_at: Option<DateTime<Utc>>,
}

impl UpdateParams {
    /// Parses `api_key`, `fieldN` and `created_at` out of query/form pairs.
    /// Other names are ignored. The key is returned even when the rest is bad
    /// so the caller can report an unknown key first.
    pub fn parse(pairs: &[(String, String)]) -> (String, std::result::Result<Self, UpdateError>) {
        let api_key = pairs
            .iter()
            .find(|(k, _)| k == "api_key" || k == "key")
            .map(|(_, v)| v.clone())
            .unwrap_or_default();
        let bad = |m: String| Err(UpdateError::BadRequest(m));
        let mut fields = Vec::new();
        let mut created_at = None;
        for (k, v) in pairs {
            if let Some(idx) = k.strip_prefix("field") {
                let Ok(i) = idx.parse::<usize>() else {
                    return (api_key, bad(format!("bad parameter {k}")));
                };
                if !(1..=MAX_FIELDS).contains(&i) {
                    return (api_key, bad(format!("no field {i}")));
                }
                if v.is_empty() {
                    continue;
                }
                match v.trim().parse::<f64>() {
                    Ok(x) if x.is_finite() => {
                        if fields.iter().any(|&(j, _)| j == i) {
                            return (api_key, bad(format!("field{i} given twice")));
                        }
                        fields.push((i, x));
                    }
                    _ => return (api_key, bad(format!("field{i} is not a number: {v:?}"))),
                }
            } else if k == "created_at" {
                match model::parse_timestamp(v) {
                    Some(t) => created_at = Some(t),
                    None => return (api_key, bad(format!("bad created_at {v:?}"))),
                }
            }
        }
        let parsed = Self { api_key: api_key.clone(), fields, created_at };
        (api_key, Ok(parsed))
    }
}

/// How a feed read proves it is allowed.
#[derive(Debug, Clone, Copy)]
pub enum Credential<'a> {
    None,
    ReadKey(&'a str),
    Session(&'a str),
}

#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub data_dir: PathBuf,
    pub min_update_interval_s: f64,
    pub session_ttl_s: f64,
    pub seed: u64,
    pub fsync: bool,
}

impl StoreConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            min_update_interval_s: 15.0,
            session_ttl_s: 3600.0,
            seed: 0,
            fsync: true,
        }
    }
}

#[derive(Debug)]
struct Feed {
    entries: Vec<FeedEntry>,
    writer: FeedWriter,
}

#[derive(Debug)]
struct Slot {
    channel: Channel,
    // Writers hold this for the whole append, which serializes ingestion
    // per channel; readers see a complete prefix.
    feed: RwLock<Feed>,
}

/// All channels, feeds and accounts, backed by a data directory.
#[derive(Debug)]
pub struct Store {
    config: StoreConfig,
    slots: RwLock<Vec<Arc<Slot>>>,
    // Serializes channel creation and the channels.json rewrite.
    create_lock: Mutex<()>,
    accounts: Accounts,
}

impl Store {
    /// Opens (or initializes) the data directory and loads everything in it.
    pub fn open(config: StoreConfig) -> Result<Self> {
        if !(config.min_update_interval_s.is_finite() && config.min_update_interval_s >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "min update interval must be >= 0, got {}",
                config.min_update_interval_s
            )));
        }
        std::fs::create_dir_all(&config.data_dir)?;
        let accounts = Accounts::new(config.session_ttl_s)?;
        let mut slots = Vec::new();
        for (i, channel) in storage::read_channels(&config.data_dir)?.into_iter().enumerate() {
            if channel.id != i as u64 + 1 {
                return Err(Error::Corrupt {
                    file: storage::CHANNELS_FILE.into(),
                    message: format!("channel id {} at position {}", channel.id, i + 1),
                });
            }
            let path = storage::feed_path(&config.data_dir, channel.id);
            let entries = storage::read_feed(&path)?;
            if let Some(e) = entries.iter().find(|e| e.field_values.len() != channel.arity()) {
                return Err(Error::Corrupt {
                    file: path.display().to_string(),
                    message: format!("entry {} has {} fields, channel has {}", e.entry_id, e.field_values.len(), channel.arity()),
                });
            }
            let writer = FeedWriter::open(&path, config.fsync)?;
            slots.push(Arc::new(Slot { channel, feed: RwLock::new(Feed { entries, writer }) }));
        }
        Ok(Self {
            config,
            slots: RwLock::new(slots),
            create_lock: Mutex::new(()),
            accounts,
        })
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn data_dir(&self) -> &Path {
        &self.config.data_dir
    }

    pub fn accounts(&self) -> &Accounts {
        &self.accounts
    }

    /// Registers a login. Call before sharing the store.
    pub fn add_user(&mut self, username: &str, password: &str, channel_ids: Vec<u64>) -> Result<()> {
        for id in &channel_ids {
            self.channel(*id)?;
        }
        self.accounts.add_user(username, password, channel_ids)
    }

    pub fn channels(&self) -> Vec<Channel> {
        self.slots.read().unwrap().iter().map(|s| s.channel.clone()).collect()
    }

    pub fn channel(&self, id: u64) -> Result<Channel> {
        self.slot(id).map(|s| s.channel.clone())
    }

    fn slot(&self, id: u64) -> Result<Arc<Slot>> {
        let slots = self.slots.read().unwrap();
        id.checked_sub(1)
            .and_then(|i| slots.get(i as usize))
            .cloned()
            .ok_or(Error::UnknownChannel(id))
    }

    pub fn create_channel(&self, name: &str, field_names: &[&str], now: DateTime<Utc>) -> Result<Channel> {
        if field_names.is_empty() || field_names.len() > MAX_FIELDS {
            return Err(Error::InvalidArgument(format!(
                "a channel needs 1 to {MAX_FIELDS} fields, got {}",
                field_names.len()
            )));
        }
        if field_names.iter().any(|f| f.trim().is_empty()) {
            return Err(Error::InvalidArgument("empty field name".into()));
        }
        let _guard = self.create_lock.lock().unwrap();
        let mut channels = self.channels();
        let id = channels.len() as u64 + 1;

        let mut taken: HashSet<String> = channels
            .iter()
            .flat_map(|c| [c.write_key.clone(), c.read_key.clone()])
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut fresh_key = || loop {
            let k = model::generate_key(&mut rng);
            if taken.insert(k.clone()) {
                break k;
            }
        };
        let channel = Channel {
            id,
            name: name.to_string(),
            field_names: field_names.iter().map(|s| s.to_string()).collect(),
            write_key: fresh_key(),
            read_key: fresh_key(),
            created_at: now,
            min_update_interval_s: self.config.min_update_interval_s,
        };

        let path = storage::feed_path(&self.config.data_dir, id);
        // A leftover feed file from a lost channels.json must not be adopted.
        if path.exists() {
            std::fs::remove_file(&path)?;
        }
        let writer = FeedWriter::open(&path, self.config.fsync)?;
        channels.push(channel.clone());
        storage::write_channels(&self.config.data_dir, &channels, self.config.fsync)?;
        self.slots.write().unwrap().push(Arc::new(Slot {
            channel: channel.clone(),
            feed: RwLock::new(Feed { entries: Vec::new(), writer }),
        }));
        Ok(channel)
    }

    fn slot_by_write_key(&self, key: &str) -> Option<Arc<Slot>> {
        let slots = self.slots.read().unwrap();
        slots.iter().find(|s| s.channel.write_key == key).cloned()
    }

    /// Raw `/update` entry point: query and form pairs in, entry id out.
    pub fn handle_update_pairs(
        &self,
        pairs: &[(String, String)],
        now: DateTime<Utc>,
    ) -> std::result::Result<u64, UpdateError> {
        let (key, parsed) = UpdateParams::parse(pairs);
        if self.slot_by_write_key(&key).is_none() {
            return Err(UpdateError::UnknownKey);
        }
        let p = parsed?;
        self.handle_update(&p.api_key, &p.fields, p.created_at, now)
    }

    /// Appends one entry. `created_at` defaults to `now`; the rate limit is
    /// measured between effective timestamps.
    pub fn handle_update(
        &self,
        api_key: &str,
        fields: &[(usize, f64)],
        created_at: Option<DateTime<Utc>>,
        now: DateTime<Utc>,
    ) -> std::result::Result<u64, UpdateError> {
        let slot = self.slot_by_write_key(api_key).ok_or(UpdateError::UnknownKey)?;
        let ch = &slot.channel;
        let mut values = vec![None; ch.arity()];
        for &(i, v) in fields {
            if i == 0 || i > ch.arity() {
                return Err(UpdateError::BadRequest(format!(
                    "field{i} outside channel with {} fields",
                    ch.arity()
                )));
            }
            if !v.is_finite() {
                return Err(UpdateError::BadRequest(format!("field{i} is not finite")));
            }
            values[i - 1] = Some(v);
        }
        if values.iter().all(Option::is_none) {
            return Err(UpdateError::BadRequest("no field values".into()));
        }
        let at = created_at.unwrap_or(now);

        let mut feed = slot.feed.write().unwrap();
        if let Some(last) = feed.entries.last() {
            // Backdated entries come out negative, so they fail too.
            let since = match (at - last.created_at).num_microseconds() {
                Some(us) => us as f64 / 1e6,
                None if at < last.created_at => f64::NEG_INFINITY,
                None => f64::INFINITY,
            };
            if since < ch.min_update_interval_s {
                return Err(UpdateError::RateLimited {
                    since_last_s: since,
                    min_interval_s: ch.min_update_interval_s,
                });
            }
        }
        let entry = FeedEntry {
            entry_id: feed.entries.len() as u64 + 1,
            created_at: at,
            field_values: values,
        };
        feed.writer
            .append(&entry)
            .map_err(|e| UpdateError::Storage(e.to_string()))?;
        feed.entries.push(entry);
        Ok(feed.entries.len() as u64)
    }

    /// The last `results` entries, oldest first, if the credential allows it.
    pub fn get_feeds(
        &self,
        channel_id: u64,
        results: usize,
        credential: Credential<'_>,
        now: DateTime<Utc>,
    ) -> Result<(Channel, Vec<FeedEntry>)> {
        if results == 0 {
            return Err(Error::InvalidArgument("results must be at least 1".into()));
        }
        let slot = self.slot(channel_id)?;
        let allowed = match credential {
            Credential::None => false,
            Credential::ReadKey(k) => {
                let ch = &slot.channel;
                model::is_valid_key(k) && (k == ch.read_key || k == ch.write_key)
            }
            Credential::Session(tok) => self.accounts.session_channels(tok, now)?.contains(&channel_id),
        };
        if !allowed {
            return Err(Error::Unauthorized);
        }
        let feed = slot.feed.read().unwrap();
        let start = feed.entries.len().saturating_sub(results);
        Ok((slot.channel.clone(), feed.entries[start..].to_vec()))
    }

    pub fn authenticate(&self, username: &str, password: &str, now: DateTime<Utc>) -> Result<String> {
        self.accounts.authenticate(username, password, now)
    }

    /// Every channel with its full feed, for comparisons and dumps.
    pub fn snapshot(&self) -> Vec<(Channel, Vec<FeedEntry>)> {
        let slots = self.slots.read().unwrap().clone();
        slots
            .iter()
            .map(|s| (s.channel.clone(), s.feed.read().unwrap().entries.clone()))
            .collect()
    }

    pub fn entry_count(&self, channel_id: u64) -> Result<usize> {
        Ok(self.slot(channel_id)?.feed.read().unwrap().entries.len())
    }
}

/// Seconds as a chrono duration, rounded to the microsecond.
pub fn seconds(s: f64) -> Duration {
    Duration::microseconds((s * 1e6).round() as i64)
}
