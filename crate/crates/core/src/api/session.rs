use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use axum::http::header::{AUTHORIZATION, COOKIE};
use axum::http::HeaderMap;
use chrono::{DateTime, Utc};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::domain::{AccessLevel, User, UserId};

pub const SESSION_COOKIE: &str = "esem_session";

/// 256 random bits, hex encoded.
const TOKEN_BYTES: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    pub token: String,
    pub user_id: UserId,
    pub access_level: AccessLevel,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

/// Server-side session table. Tokens are kept only as SHA-256 digests.
#[derive(Debug)]
pub struct SessionStore {
    ttl: chrono::Duration,
    sessions: Mutex<HashMap<[u8; 32], Session>>,
}

fn digest(token: &str) -> [u8; 32] {
    Sha256::digest(token.as_bytes()).into()
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        SessionStore {
            ttl: chrono::Duration::from_std(ttl).unwrap_or(chrono::Duration::MAX),
            sessions: Mutex::new(HashMap::new()),
        }
    }

    fn table(&self) -> std::sync::MutexGuard<'_, HashMap<[u8; 32], Session>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn issue(&self, user: &User, now: DateTime<Utc>) -> Session {
        let mut bytes = [0u8; TOKEN_BYTES];
        OsRng.fill_bytes(&mut bytes);
        let session = Session {
            token: hex::encode(bytes),
            user_id: user.id,
            access_level: user.access_level,
            issued_at: now,
            expires_at: now + self.ttl,
        };
        let mut table = self.table();
        table.retain(|_, s| s.expires_at > now);
        table.insert(digest(&session.token), session.clone());
        session
    }

    /// The live session for `token`; expired entries are dropped on sight.
    pub fn lookup(&self, token: &str, now: DateTime<Utc>) -> Option<Session> {
        let key = digest(token);
        let mut table = self.table();
        match table.get(&key) {
            Some(s) if s.expires_at > now => Some(s.clone()),
            Some(_) => {
                table.remove(&key);
                None
            }
            None => None,
        }
    }

    pub fn revoke(&self, token: &str) -> bool {
        self.table().remove(&digest(token)).is_some()
    }

    pub fn revoke_user(&self, user: UserId) {
        self.table().retain(|_, s| s.user_id != user);
    }

    /// Signs the user out everywhere except the session holding `keep`.
    pub fn revoke_others(&self, user: UserId, keep: &str) {
        let keep = digest(keep);
        self.table().retain(|k, s| s.user_id != user || *k == keep);
    }

    pub fn len(&self) -> usize {
        self.table().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Bearer token from the Authorization header, else the session cookie.
pub fn token_from_headers(headers: &HeaderMap) -> Option<String> {
    if let Some(value) = headers.get(AUTHORIZATION).and_then(|v| v.to_str().ok()) {
        if let Some(token) = value.strip_prefix("Bearer ") {
            return Some(token.trim().to_string());
        }
    }
    headers
        .get_all(COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|pair| pair.trim().split_once('='))
        .find(|(name, _)| *name == SESSION_COOKIE)
        .map(|(_, value)| value.to_string())
}

pub fn session_cookie(session: &Session, ttl_secs: i64) -> String {
    format!(
        "{SESSION_COOKIE}={}; Path=/; HttpOnly; SameSite=Strict; Max-Age={ttl_secs}",
        session.token
    )
}

pub fn clear_cookie() -> String {
    format!("{SESSION_COOKIE}=; Path=/; HttpOnly; SameSite=Strict; Max-Age=0")
}
