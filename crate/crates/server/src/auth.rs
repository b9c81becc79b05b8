//! Human accounts and bearer sessions.

use std::collections::HashMap;
use std::sync::Mutex;

use chrono::{DateTime, Duration, Utc};
use rand::RngCore;
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;

use crate::{Error, Result};

const SALT_LEN: usize = 16;
const TOKEN_BYTES: usize = 24;
pub const DIGEST_ROUNDS: u32 = 10_000;

/// Salted, iterated SHA-256. The plaintext is never kept.
#[derive(Clone, PartialEq, Eq)]
pub struct PasswordDigest {
    salt: [u8; SALT_LEN],
    hash: [u8; 32],
}

impl std::fmt::Debug for PasswordDigest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("PasswordDigest(..)")
    }
}

impl PasswordDigest {
    pub fn new(password: &str) -> Self {
        let mut salt = [0u8; SALT_LEN];
        rand::rng().fill_bytes(&mut salt);
        Self::with_salt(password, salt)
    }

    fn with_salt(password: &str, salt: [u8; SALT_LEN]) -> Self {
        let mut hash: [u8; 32] = Sha256::new()
            .chain_update(salt)
            .chain_update(password.as_bytes())
            .finalize()
            .into();
        for _ in 1..DIGEST_ROUNDS {
            hash = Sha256::new().chain_update(salt).chain_update(hash).finalize().into();
        }
        Self { salt, hash }
    }

    pub fn verify(&self, password: &str) -> bool {
        let other = Self::with_salt(password, self.salt);
        self.hash.ct_eq(&other.hash).into()
    }
}

#[derive(Debug, Clone)]
pub struct UserAccount {
    pub username: String,
    pub password_digest: PasswordDigest,
    pub channel_ids: Vec<u64>,
}

#[derive(Debug, Clone)]
struct Session {
    username: String,
    channel_ids: Vec<u64>,
    expires_at: DateTime<Utc>,
}

/// Who is allowed to read what. Users are registered at startup; sessions
/// live in memory only.
#[derive(Debug)]
pub struct Accounts {
    users: HashMap<String, UserAccount>,
    sessions: Mutex<HashMap<String, Session>>,
    ttl: Duration,
    // Verified against when the username is unknown so both failures cost the same.
    decoy: PasswordDigest,
}

impl Accounts {
    pub fn new(session_ttl_s: f64) -> Result<Self> {
        if !(session_ttl_s.is_finite() && session_ttl_s > 0.0) {
            return Err(Error::InvalidArgument(format!("session ttl must be positive, got {session_ttl_s}")));
        }
        Ok(Self {
            users: HashMap::new(),
            sessions: Mutex::new(HashMap::new()),
            ttl: Duration::milliseconds((session_ttl_s * 1000.0).round() as i64),
            decoy: PasswordDigest::new(""),
        })
    }

    pub fn add_user(&mut self, username: &str, password: &str, channel_ids: Vec<u64>) -> Result<()> {
        if username.is_empty() {
            return Err(Error::InvalidArgument("empty username".into()));
        }
        if self.users.contains_key(username) {
            return Err(Error::InvalidArgument(format!("duplicate user {username:?}")));
        }
        self.users.insert(
            username.to_string(),
            UserAccount {
                username: username.to_string(),
                password_digest: PasswordDigest::new(password),
                channel_ids,
            },
        );
        Ok(())
    }

    pub fn user(&self, username: &str) -> Option<&UserAccount> {
        self.users.get(username)
    }

    /// Unknown users and wrong passwords both give `AuthenticationFailed`.
    pub fn authenticate(&self, username: &str, password: &str, now: DateTime<Utc>) -> Result<String> {
        let ok = match self.users.get(username) {
            Some(u) => u.password_digest.verify(password),
            None => {
                let _ = self.decoy.verify(password);
                false
            }
        };
        if !ok {
            return Err(Error::AuthenticationFailed);
        }
        let user = &self.users[username];
        let mut bytes = [0u8; TOKEN_BYTES];
        rand::rng().fill_bytes(&mut bytes);
        let token = hex::encode(bytes);
        let mut sessions = self.sessions.lock().unwrap();
        sessions.retain(|_, s| s.expires_at > now);
        sessions.insert(
            token.clone(),
            Session {
                username: user.username.clone(),
                channel_ids: user.channel_ids.clone(),
                expires_at: now + self.ttl,
            },
        );
        Ok(token)
    }

    /// Channels a live session may read, or `Unauthorized`.
    pub fn session_channels(&self, token: &str, now: DateTime<Utc>) -> Result<Vec<u64>> {
        let mut sessions = self.sessions.lock().unwrap();
        match sessions.get(token) {
            Some(s) if s.expires_at > now => Ok(s.channel_ids.clone()),
            Some(_) => {
                sessions.remove(token);
                Err(Error::Unauthorized)
            }
            None => Err(Error::Unauthorized),
        }
    }

    pub fn session_user(&self, token: &str) -> Option<String> {
        self.sessions.lock().unwrap().get(token).map(|s| s.username.clone())
    }
}
