use std::path::{Path, PathBuf};

use lcsched_core::scheduler::SearchConfig;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const ENV_PORT: &str = "LCSCHED_PORT";
pub const ENV_DATA_DIR: &str = "LCSCHED_DATA_DIR";
pub const ENV_PRIOR_LIBRARY: &str = "LCSCHED_PRIOR_LIBRARY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    /// Session event logs live under `<data_dir>/sessions`.
    pub data_dir: PathBuf,
    /// JSON map of task id to curve state, used for human agents whose
    /// instance entry has no curve for a task.
    pub prior_library: Option<PathBuf>,
    /// Default search settings; a session may override them.
    pub search: SearchConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("data"),
            prior_library: None,
            search: SearchConfig::default(),
        }
    }
}

impl ServiceConfig {
    /// Reads the optional config file, then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ServiceError::Config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| ServiceError::Config(e.to_string()))?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.search.validate().map_err(|e| ServiceError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ServiceError> {
        if let Some(p) = var(ENV_PORT) {
            self.port = p
                .parse()
                .map_err(|_| ServiceError::Config(format!("{ENV_PORT} is not a port: {p}")))?;
        }
        if let Some(d) = var(ENV_DATA_DIR) {
            self.data_dir = d.into();
        }
        if let Some(l) = var(ENV_PRIOR_LIBRARY) {
            self.prior_library = Some(l.into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_file_values() {
        let mut cfg: ServiceConfig = toml::from_str("port = 9000\ndata_dir = \"/var/x\"\n").unwrap();
        cfg.apply_env(|k| match k {
            ENV_PORT => Some("7000".into()),
            ENV_PRIOR_LIBRARY => Some("/p.json".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.port, 7000);
        assert_eq!(cfg.data_dir, PathBuf::from("/var/x"));
        assert_eq!(cfg.prior_library, Some(PathBuf::from("/p.json")));
    }

    #[test]
    fn bad_port_is_a_config_error() {
        let mut cfg = ServiceConfig::default();
        let err = cfg.apply_env(|k| (k == ENV_PORT).then(|| "eighty".to_string())).unwrap_err();
        assert!(matches!(err, ServiceError::Config(_)));
    }

    #[test]
    fn search_section_is_partial() {
        let cfg: ServiceConfig = toml::from_str("[search]\nmax_generations = 10\n").unwrap();
        assert_eq!(cfg.search.max_generations, Some(10));
        assert_eq!(cfg.search.time_limit_secs, Some(5.0));
    }
}
