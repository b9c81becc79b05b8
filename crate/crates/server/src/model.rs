use chrono::{DateTime, SecondsFormat, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const MAX_FIELDS: usize = 8;
pub const KEY_LEN: usize = 16;
const KEY_ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

/// A channel: one device's feed with up to eight named numeric fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub id: u64,
    pub name: String,
    pub field_names: Vec<String>,
    pub write_key: String,
    pub read_key: String,
    pub created_at: DateTime<Utc>,
    pub min_update_interval_s: f64,
}

impl Channel {
    pub fn arity(&self) -> usize {
        self.field_names.len()
    }
}

/// One stored observation row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedEntry {
    pub entry_id: u64,
    pub created_at: DateTime<Utc>,
    /// Aligned with the channel's `field_names`.
    pub field_values: Vec<Option<f64>>,
}

pub fn generate_key<R: Rng + ?Sized>(rng: &mut R) -> String {
    (0..KEY_LEN)
        .map(|_| KEY_ALPHABET[rng.random_range(0..KEY_ALPHABET.len())] as char)
        .collect()
}

pub fn is_valid_key(key: &str) -> bool {
    key.len() == KEY_LEN && key.bytes().all(|b| b.is_ascii_uppercase() || b.is_ascii_digit())
}

/// ISO-8601 in UTC with a `Z` suffix; fractional seconds only when present.
pub fn format_timestamp(ts: DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Accepts RFC 3339 or the `YYYY-MM-DD HH:MM:SS` form (taken as UTC).
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f")
        .or_else(|_| chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f"))
        .ok()
        .map(|n| n.and_utc())
}

/// Field values travel as strings, the way ThingSpeak returns them.
pub fn format_field(v: f64) -> String {
    format!("{v:?}")
}
