//! Registry fetch client.
//!
//! Live HTML scraping is out of scope; the contract is an archive endpoint
//! serving JSON payloads of recorded version histories. The transport is a
//! trait so tests can replay recorded fixtures without a network.

use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ECVersion, Split, TrialMetadata, TrialRecord};

pub const CACHE_DIR_ENV: &str = "AMENDLAB_CACHE_DIR";

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("trial {0:?} not found")]
    NotFound(String),
    #[error("HTTP request failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("unparseable payload for trial {id:?}: {source}")]
    UnparseablePayload {
        id: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("cache I/O error: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// URL template; `{trial_id}` is substituted, otherwise the id is
    /// appended as a path segment.
    pub base_url: String,
    /// Client-side request rate limit (requests per second).
    #[serde(default = "default_rps")]
    pub rps: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
}

fn default_rps() -> f64 {
    2.0
}

fn default_max_retries() -> u32 {
    3
}

impl EndpointConfig {
    fn url_for(&self, trial_id: &str) -> String {
        if self.base_url.contains("{trial_id}") {
            self.base_url.replace("{trial_id}", trial_id)
        } else {
            format!("{}/{}", self.base_url.trim_end_matches('/'), trial_id)
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransportResponse {
    pub status: u16,
    pub body: String,
}

pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<TransportResponse, String>;
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Self {
        Self {
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(30))
                .build()
                .expect("client construction cannot fail with static config"),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<TransportResponse, String> {
        let resp = self.client.get(url).send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| e.to_string())?;
        Ok(TransportResponse { status, body })
    }
}

/// One version entry in an archive payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchiveVersion {
    pub timestamp: chrono::NaiveDate,
    pub eligibility_criteria: String,
}

/// Archived record-history payload served by the endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchivePayload {
    pub trial_id: String,
    pub versions: Vec<ArchiveVersion>,
    #[serde(default)]
    pub metadata: TrialMetadata,
}

pub struct FetchClient<T: Transport> {
    config: EndpointConfig,
    transport: T,
    cache_dir: Option<PathBuf>,
    last_request: Mutex<Option<Instant>>,
}

impl<T: Transport> FetchClient<T> {
    pub fn new(config: EndpointConfig, transport: T) -> Self {
        let cache_dir = std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from);
        Self::with_cache_dir(config, transport, cache_dir)
    }

    pub fn with_cache_dir(
        config: EndpointConfig,
        transport: T,
        cache_dir: Option<PathBuf>,
    ) -> Self {
        Self {
            config,
            transport,
            cache_dir,
            last_request: Mutex::new(None),
        }
    }

    /// Fetch all recoverable EC versions of one trial.
    ///
    /// Responses are cached on disk keyed by trial id and fetch date;
    /// consecutive identical version texts are retained (dedup is a labeling
    /// concern, not a transport concern).
    pub fn fetch_history(&self, trial_id: &str) -> Result<TrialRecord, FetchError> {
        let body = match self.cached_body(trial_id)? {
            Some(body) => body,
            None => {
                let body = self.fetch_with_retries(trial_id)?;
                self.store_cache(trial_id, &body)?;
                body
            }
        };
        let payload: ArchivePayload =
            serde_json::from_str(&body).map_err(|source| FetchError::UnparseablePayload {
                id: trial_id.to_string(),
                source,
            })?;
        Ok(payload_to_record(payload))
    }

    fn fetch_with_retries(&self, trial_id: &str) -> Result<String, FetchError> {
        let url = self.config.url_for(trial_id);
        let mut last_err = String::new();
        for attempt in 0..=self.config.max_retries {
            self.throttle();
            match self.transport.get(&url) {
                Ok(resp) if resp.status == 404 => {
                    return Err(FetchError::NotFound(trial_id.to_string()))
                }
                Ok(resp) if resp.status < 400 => return Ok(resp.body),
                Ok(resp) => last_err = format!("HTTP status {}", resp.status),
                Err(e) => last_err = e,
            }
            if attempt < self.config.max_retries {
                std::thread::sleep(Duration::from_millis(50 << attempt));
            }
        }
        Err(FetchError::Transport {
            attempts: self.config.max_retries + 1,
            message: last_err,
        })
    }

    fn throttle(&self) {
        if self.config.rps <= 0.0 {
            return;
        }
        let min_gap = Duration::from_secs_f64(1.0 / self.config.rps);
        let mut last = self.last_request.lock().expect("throttle lock");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < min_gap {
                std::thread::sleep(min_gap - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn cache_path(&self, trial_id: &str) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        let date = chrono::Local::now().format("%Y-%m-%d");
        Some(dir.join(format!("{trial_id}_{date}.json")))
    }

    fn cached_body(&self, trial_id: &str) -> Result<Option<String>, FetchError> {
        match self.cache_path(trial_id) {
            Some(path) if path.exists() => Ok(Some(std::fs::read_to_string(path)?)),
            _ => Ok(None),
        }
    }

    fn store_cache(&self, trial_id: &str, body: &str) -> Result<(), FetchError> {
        if let Some(path) = self.cache_path(trial_id) {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            // atomic write: temp file then rename
            let tmp = path.with_extension("json.tmp");
            std::fs::write(&tmp, body)?;
            std::fs::rename(&tmp, &path)?;
        }
        Ok(())
    }
}

fn payload_to_record(payload: ArchivePayload) -> TrialRecord {
    let mut versions = payload.versions;
    versions.sort_by_key(|v| v.timestamp);
    TrialRecord {
        trial_id: payload.trial_id,
        ec_versions: versions
            .into_iter()
            .enumerate()
            .map(|(i, v)| ECVersion {
                version_index: i as u32,
                timestamp: v.timestamp,
                text: v.eligibility_criteria,
            })
            .collect(),
        metadata: payload.metadata,
        label_registry: None,
        label_llm: None,
        label_human: None,
        amendment_count: None,
        split: Split::Train,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct FixtureTransport {
        body: String,
        status: u16,
        calls: AtomicU32,
    }

    impl Transport for FixtureTransport {
        fn get(&self, _url: &str) -> Result<TransportResponse, String> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(TransportResponse {
                status: self.status,
                body: self.body.clone(),
            })
        }
    }

    fn config() -> EndpointConfig {
        EndpointConfig {
            base_url: "http://archive.test/history/{trial_id}".into(),
            rps: 0.0,
            max_retries: 1,
        }
    }

    const FIXTURE: &str = include_str!("../../fixtures/history_response.json");

    #[test]
    fn fixture_payload_yields_ordered_versions() {
        let transport = FixtureTransport {
            body: FIXTURE.into(),
            status: 200,
            calls: AtomicU32::new(0),
        };
        let client = FetchClient::with_cache_dir(config(), transport, None);
        let rec = client.fetch_history("NCT01234567").unwrap();
        assert_eq!(rec.trial_id, "NCT01234567");
        assert_eq!(rec.ec_versions.len(), 4);
        for pair in rec.ec_versions.windows(2) {
            assert!(pair[0].timestamp <= pair[1].timestamp);
        }
        assert_eq!(rec.ec_versions[0].version_index, 0);
    }

    #[test]
    fn not_found_is_typed() {
        let transport = FixtureTransport {
            body: String::new(),
            status: 404,
            calls: AtomicU32::new(0),
        };
        let client = FetchClient::with_cache_dir(config(), transport, None);
        assert!(matches!(
            client.fetch_history("NCT000"),
            Err(FetchError::NotFound(_))
        ));
    }

    #[test]
    fn duplicate_identical_versions_are_retained() {
        let payload = serde_json::json!({
            "trial_id": "NCTDUP",
            "versions": [
                {"timestamp": "2020-01-01", "eligibility_criteria": "age >= 18"},
                {"timestamp": "2020-02-01", "eligibility_criteria": "age >= 18"}
            ]
        });
        let transport = FixtureTransport {
            body: payload.to_string(),
            status: 200,
            calls: AtomicU32::new(0),
        };
        let client = FetchClient::with_cache_dir(config(), transport, None);
        let rec = client.fetch_history("NCTDUP").unwrap();
        assert_eq!(rec.ec_versions.len(), 2);
        assert_eq!(rec.ec_versions[0].text, rec.ec_versions[1].text);
    }

    #[test]
    fn transport_failure_reports_attempts() {
        struct Failing;
        impl Transport for Failing {
            fn get(&self, _url: &str) -> Result<TransportResponse, String> {
                Err("connection refused".into())
            }
        }
        let client = FetchClient::with_cache_dir(config(), Failing, None);
        match client.fetch_history("NCT000") {
            Err(FetchError::Transport { attempts, .. }) => assert_eq!(attempts, 2),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn second_fetch_hits_cache() {
        let dir = tempfile::tempdir().unwrap();
        let transport = FixtureTransport {
            body: FIXTURE.into(),
            status: 200,
            calls: AtomicU32::new(0),
        };
        let client =
            FetchClient::with_cache_dir(config(), transport, Some(dir.path().to_path_buf()));
        client.fetch_history("NCT01234567").unwrap();
        client.fetch_history("NCT01234567").unwrap();
        assert_eq!(client.transport.calls.load(Ordering::SeqCst), 1);
    }
}
