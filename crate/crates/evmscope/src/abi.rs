//! Contract-ABI JSON handling and a small block-explorer client.
//!
//! The client speaks the Etherscan `module=contract&action=getabi` protocol.
//! Fetched ABIs are cached verbatim as `<cache>/<address>.json`; a cached
//! file is served without touching the network. Unverified contracts and
//! HTTP 404 are misses, not errors, and are not cached.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use evmscope_core::features::{AbiItem, FilteredAbi};
use serde::Deserialize;

pub const API_KEY_VAR: &str = "ETHERSCAN_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api.etherscan.io/api";
pub const DEFAULT_JOBS: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum AbiError {
    #[error("invalid ABI JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("ABI signature: {0}")]
    Signature(#[from] evmscope_core::signature::SignatureError),
}

/// Parses standard contract-ABI JSON and drops every name.
pub fn filter_abi_json(text: &str) -> Result<FilteredAbi, AbiError> {
    let items: Vec<AbiItem> = serde_json::from_str(text)?;
    Ok(FilteredAbi::from_items(&items)?)
}

#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub cache_dir: PathBuf,
    pub timeout: Duration,
}

impl FetchConfig {
    /// Default endpoint, API key from the environment.
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        FetchConfig {
            endpoint: DEFAULT_ENDPOINT.to_string(),
            api_key: std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty()),
            cache_dir: cache_dir.into(),
            timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FetchOutcome {
    Hit { abi: FilteredAbi, cached: bool },
    Miss { reason: String },
}

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("not a 20-byte hex address: {0:?}")]
    InvalidAddress(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("HTTP status {0}")]
    Http(u16),
    #[error("unexpected response: {0}")]
    Response(String),
    #[error(transparent)]
    Abi(#[from] AbiError),
    #[error("cache {path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Lower-case `0x`-prefixed form of a 20-byte address.
pub fn normalize_address(address: &str) -> Result<String, FetchError> {
    let digits = address
        .strip_prefix("0x")
        .or_else(|| address.strip_prefix("0X"))
        .unwrap_or(address);
    if digits.len() == 40 && digits.bytes().all(|b| b.is_ascii_hexdigit()) {
        Ok(format!("0x{}", digits.to_ascii_lowercase()))
    } else {
        Err(FetchError::InvalidAddress(address.to_string()))
    }
}

pub fn cache_path(cache_dir: &Path, address: &str) -> PathBuf {
    cache_dir.join(format!("{address}.json"))
}

#[derive(Deserialize)]
struct ExplorerResponse {
    status: String,
    #[serde(default)]
    message: String,
    result: serde_json::Value,
}

fn looks_like_auth_failure(text: &str) -> bool {
    let t = text.to_ascii_lowercase();
    t.contains("api key") || t.contains("apikey") || t.contains("unauthorized")
}

pub fn fetch_abi(address: &str, config: &FetchConfig) -> Result<FetchOutcome, FetchError> {
    let address = normalize_address(address)?;
    let path = cache_path(&config.cache_dir, &address);
    if path.is_file() {
        let text = std::fs::read_to_string(&path).map_err(|source| FetchError::Cache {
            path: path.clone(),
            source,
        })?;
        log::debug!("{address}: cache hit");
        return Ok(FetchOutcome::Hit {
            abi: filter_abi_json(&text)?,
            cached: true,
        });
    }

    let mut request = ureq::get(&config.endpoint)
        .timeout(config.timeout)
        .query("module", "contract")
        .query("action", "getabi")
        .query("address", &address);
    if let Some(key) = &config.api_key {
        request = request.query("apikey", key);
    }
    let body = match request.call() {
        Ok(resp) => resp
            .into_string()
            .map_err(|e| FetchError::Network(e.to_string()))?,
        Err(ureq::Error::Status(404, _)) => {
            return Ok(FetchOutcome::Miss {
                reason: "HTTP 404".into(),
            })
        }
        Err(ureq::Error::Status(code @ (401 | 403), _)) => {
            return Err(FetchError::Auth(format!("HTTP {code}")))
        }
        Err(ureq::Error::Status(code, _)) => return Err(FetchError::Http(code)),
        Err(ureq::Error::Transport(t)) => return Err(FetchError::Network(t.to_string())),
    };

    let resp: ExplorerResponse =
        serde_json::from_str(&body).map_err(|e| FetchError::Response(e.to_string()))?;
    let result = resp.result.as_str().unwrap_or_default();
    if resp.status != "1" {
        if looks_like_auth_failure(result) || looks_like_auth_failure(&resp.message) {
            return Err(FetchError::Auth(result.to_string()));
        }
        return Ok(FetchOutcome::Miss {
            reason: if result.is_empty() {
                resp.message
            } else {
                result.to_string()
            },
        });
    }
    let abi = filter_abi_json(result)?;
    let cache_err = |source| FetchError::Cache {
        path: path.clone(),
        source,
    };
    std::fs::create_dir_all(&config.cache_dir).map_err(cache_err)?;
    // write-then-rename so a concurrent reader never sees half a file
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, result).map_err(cache_err)?;
    std::fs::rename(&tmp, &path).map_err(cache_err)?;
    Ok(FetchOutcome::Hit { abi, cached: false })
}

/// Fetches many addresses with at most `jobs` requests in flight. Results
/// come back in input order.
pub fn fetch_many(
    addresses: &[String],
    config: &FetchConfig,
    jobs: usize,
) -> Vec<Result<FetchOutcome, FetchError>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<FetchOutcome, FetchError>>>> =
        addresses.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, addresses.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(address) = addresses.get(i) else {
                    break;
                };
                *slots[i].lock().unwrap() = Some(fetch_abi(address, config));
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every slot filled"))
        .collect()
}
