//! Generic HTTP blob-endpoint backend.
//!
//! Speaks plain HTTP to any server implementing this small contract, where
//! `{key}` is the percent-encoded rendered storage key:
//!
//! - `GET {base}/{key}` → `200` with the body, or `404`
//! - `HEAD {base}/{key}` → `200` or `404`
//! - `PUT {base}/{key}` → `2xx`; sent with `if-none-match: *` when
//!   `overwrite=false`, and `412`/`409` then means "already exists"
//! - `DELETE {base}/{key}` → `2xx`, or `404`
//! - `GET {base}/_list?prefix={p}` → `200` with newline-delimited rendered
//!   keys (the client re-sorts and de-duplicates defensively)
//!
//! Transport errors, `429`, and `5xx` responses are retried with expiring
//! backoff; everything else is definitive. A retried no-overwrite put that
//! raced its own half-completed first attempt can surface as
//! `AlreadyExists` — acceptable for an at-least-once writer, and the body
//! stored is still a complete one.

use std::time::Duration;

use crate::key::{KeyPrefix, StorageKey};

use super::{KeyIter, ObjectStore, PutReceipt, StoreError};

/// Bodies larger than this are refused rather than buffered blindly.
const MAX_BODY_BYTES: u64 = 1 << 30;

pub struct HttpStore {
    base: String,
    agent: ureq::Agent,
    attempts: u32,
    backoff: Duration,
}

impl HttpStore {
    pub fn new(base: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpStore {
            base: base.trim_end_matches('/').to_string(),
            agent,
            attempts: 3,
            backoff: Duration::from_millis(50),
        }
    }

    /// Overrides the retry schedule (mainly for tests).
    pub fn with_retries(mut self, attempts: u32, backoff: Duration) -> Self {
        self.attempts = attempts.max(1);
        self.backoff = backoff;
        self
    }

    fn object_url(&self, key: &StorageKey) -> String {
        format!("{}/{}", self.base, encode_path(&key.render()))
    }

    /// Runs `op` with retries on transport errors and retryable statuses.
    fn with_retry<T>(
        &self,
        what: &str,
        mut op: impl FnMut() -> Result<T, StoreError>,
    ) -> Result<T, StoreError> {
        let mut delay = self.backoff;
        let mut last = None;
        for attempt in 0..self.attempts {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay = delay.saturating_mul(2);
            }
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() => {
                    tracing::debug!(what, attempt, error = %e, "retrying store call");
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt ran"))
    }
}

fn transport_err(e: ureq::Error) -> StoreError {
    StoreError::BackendUnavailable {
        detail: e.to_string(),
        retryable: true,
    }
}

fn status_err(status: u16, context: &str) -> StoreError {
    StoreError::BackendUnavailable {
        detail: format!("{context}: HTTP {status}"),
        retryable: matches!(status, 429 | 500..=599),
    }
}

fn read_body(resp: &mut ureq::http::Response<ureq::Body>) -> Result<Vec<u8>, StoreError> {
    resp.body_mut()
        .with_config()
        .limit(MAX_BODY_BYTES)
        .read_to_vec()
        .map_err(|e| StoreError::BackendUnavailable {
            detail: format!("reading response body: {e}"),
            retryable: true,
        })
}

impl ObjectStore for HttpStore {
    fn put(&self, key: &StorageKey, body: &[u8], overwrite: bool) -> Result<PutReceipt, StoreError> {
        if body.is_empty() {
            return Err(StoreError::EmptyBody(key.render()));
        }
        let url = self.object_url(key);
        self.with_retry("put", || {
            let mut req = self.agent.put(&url);
            if !overwrite {
                req = req.header("if-none-match", "*");
            }
            let resp = req.send(body).map_err(transport_err)?;
            match resp.status().as_u16() {
                s if (200..300).contains(&s) => Ok(()),
                412 | 409 => Err(StoreError::AlreadyExists(key.render())),
                s => Err(status_err(s, "put")),
            }
        })?;
        Ok(PutReceipt {
            key: key.clone(),
            byte_count: body.len() as u64,
        })
    }

    fn get(&self, key: &StorageKey) -> Result<Vec<u8>, StoreError> {
        let url = self.object_url(key);
        self.with_retry("get", || {
            let mut resp = self.agent.get(&url).call().map_err(transport_err)?;
            match resp.status().as_u16() {
                s if (200..300).contains(&s) => read_body(&mut resp),
                404 => Err(StoreError::NotFound(key.render())),
                s => Err(status_err(s, "get")),
            }
        })
    }

    fn exists(&self, key: &StorageKey) -> Result<bool, StoreError> {
        let url = self.object_url(key);
        self.with_retry("head", || {
            let resp = self.agent.head(&url).call().map_err(transport_err)?;
            match resp.status().as_u16() {
                s if (200..300).contains(&s) => Ok(true),
                404 => Ok(false),
                s => Err(status_err(s, "head")),
            }
        })
    }

    fn list<'a>(&'a self, prefix: &KeyPrefix) -> Result<KeyIter<'a>, StoreError> {
        let url = format!(
            "{}/_list?prefix={}",
            self.base,
            encode_component(prefix.as_str())
        );
        let prefix_str = prefix.as_str().to_string();
        let body = self.with_retry("list", || {
            let mut resp = self.agent.get(&url).call().map_err(transport_err)?;
            match resp.status().as_u16() {
                s if (200..300).contains(&s) => read_body(&mut resp),
                s => Err(status_err(s, "list")),
            }
        })?;
        let text = String::from_utf8(body).map_err(|e| StoreError::BackendUnavailable {
            detail: format!("listing is not UTF-8: {e}"),
            retryable: false,
        })?;
        let mut rendered: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && l.starts_with(&prefix_str))
            .map(str::to_string)
            .collect();
        rendered.sort_unstable();
        rendered.dedup();
        Ok(Box::new(rendered.into_iter().map(|r| {
            StorageKey::parse(&r).map_err(StoreError::from)
        })))
    }

    fn delete(&self, key: &StorageKey) -> Result<(), StoreError> {
        let url = self.object_url(key);
        self.with_retry("delete", || {
            let resp = self.agent.delete(&url).call().map_err(transport_err)?;
            match resp.status().as_u16() {
                s if (200..300).contains(&s) => Ok(()),
                404 => Err(StoreError::NotFound(key.render())),
                s => Err(status_err(s, "delete")),
            }
        })
    }
}

/// Percent-encodes a rendered key for the path position: `/` separators
/// pass through, everything outside the unreserved set is escaped.
fn encode_path(rendered: &str) -> String {
    encode(rendered, true)
}

/// Percent-encodes a query component; `/` is escaped too.
fn encode_component(s: &str) -> String {
    encode(s, false)
}

fn encode(s: &str, keep_slash: bool) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'.' | b'_' | b'~' => {
                out.push(b as char)
            }
            b'/' if keep_slash => out.push('/'),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_encoding_keeps_separators_and_escapes_the_rest() {
        assert_eq!(
            encode_path("documents/ds/my file+v2.json"),
            "documents/ds/my%20file%2Bv2.json"
        );
        assert_eq!(encode_component("documents/ds/"), "documents%2Fds%2F");
        assert_eq!(encode_path("a/\u{e9}.json"), "a/%C3%A9.json");
    }

    #[test]
    fn unreachable_endpoint_reports_retryable_unavailability() {
        // Port 1 is never listening; the error must be retryable so callers
        // can distinguish outages from definitive failures.
        let store = HttpStore::new("http://127.0.0.1:1/base")
            .with_retries(1, Duration::from_millis(1));
        let key = StorageKey::document("ds", "a").unwrap();
        match store.get(&key) {
            Err(e) => assert!(e.is_retryable(), "expected retryable, got {e:?}"),
            Ok(_) => panic!("expected failure"),
        }
    }
}
