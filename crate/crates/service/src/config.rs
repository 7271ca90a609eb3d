use std::path::PathBuf;

use clinreason_core::inquiry::AdapterConfig;

pub const DEFAULT_LISTEN_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_STORE_ROOT: &str = "store";

/// Service settings, read from `STORE_ROOT`, `LISTEN_ADDR`, `API_TOKEN` and
/// the model adapter variables.
#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub store_root: PathBuf,
    pub listen_addr: String,
    pub adapter: AdapterConfig,
    /// Bearer token required on mutating routes, when set.
    pub api_token: Option<String>,
}

impl ServiceConfig {
    pub fn from_env() -> Self {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Self {
        let non_empty = |k: &str| get(k).filter(|v| !v.trim().is_empty());
        Self {
            store_root: non_empty("STORE_ROOT").map_or_else(|| PathBuf::from(DEFAULT_STORE_ROOT), PathBuf::from),
            listen_addr: non_empty("LISTEN_ADDR").unwrap_or_else(|| DEFAULT_LISTEN_ADDR.to_owned()),
            adapter: AdapterConfig::from_lookup(&get),
            api_token: non_empty("API_TOKEN"),
        }
    }
}
