//! Settings resolution. Each value comes from the first source that sets it:
//! command-line flags, then `FASHIONREC_*` environment variables, then the
//! TOML config file, then built-in defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use fashionrec::PipelineConfig;
use serde::Deserialize;

pub const ENV_CONFIG: &str = "FASHIONREC_CONFIG";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config file {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid value {value:?} for {var}")]
    Env { var: &'static str, value: String },
    #[error("{0}")]
    Invalid(String),
}

/// One layer of optional settings.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Layer {
    pub data_dir: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub fixtures: Option<PathBuf>,
    pub remote: Option<String>,
    pub port: Option<u16>,
    pub top_k: Option<usize>,
    pub parallelism: Option<usize>,
    pub fallback: Option<bool>,
    pub remote_timeout_ms: Option<u64>,
    pub max_in_flight: Option<usize>,
    /// Pipeline tuning; only read from the config file's `[pipeline]` table.
    pub pipeline: Option<PipelineConfig>,
}

/// A config file is a single layer.
pub type FileConfig = Layer;

impl Layer {
    fn or(self, lower: Layer) -> Layer {
        Layer {
            data_dir: self.data_dir.or(lower.data_dir),
            taxonomy: self.taxonomy.or(lower.taxonomy),
            fixtures: self.fixtures.or(lower.fixtures),
            remote: self.remote.or(lower.remote),
            port: self.port.or(lower.port),
            top_k: self.top_k.or(lower.top_k),
            parallelism: self.parallelism.or(lower.parallelism),
            fallback: self.fallback.or(lower.fallback),
            remote_timeout_ms: self.remote_timeout_ms.or(lower.remote_timeout_ms),
            max_in_flight: self.max_in_flight.or(lower.max_in_flight),
            pipeline: self.pipeline.or(lower.pipeline),
        }
    }

    /// Reads `FASHIONREC_*` variables through `lookup`.
    pub fn from_env(lookup: impl Fn(&str) -> Option<String>) -> Result<Layer, ConfigError> {
        fn parse<T: FromStr>(
            lookup: &impl Fn(&str) -> Option<String>,
            var: &'static str,
        ) -> Result<Option<T>, ConfigError> {
            match lookup(var) {
                None => Ok(None),
                Some(v) if v.is_empty() => Ok(None),
                Some(v) => v.parse().map(Some).map_err(|_| ConfigError::Env { var, value: v }),
            }
        }
        Ok(Layer {
            data_dir: parse(&lookup, "FASHIONREC_DATA")?,
            taxonomy: parse(&lookup, "FASHIONREC_TAXONOMY")?,
            fixtures: parse(&lookup, "FASHIONREC_FIXTURES")?,
            remote: parse(&lookup, "FASHIONREC_REMOTE")?,
            port: parse(&lookup, "FASHIONREC_PORT")?,
            top_k: parse(&lookup, "FASHIONREC_TOP_K")?,
            parallelism: parse(&lookup, "FASHIONREC_PARALLELISM")?,
            fallback: parse(&lookup, "FASHIONREC_FALLBACK")?,
            remote_timeout_ms: parse(&lookup, "FASHIONREC_REMOTE_TIMEOUT_MS")?,
            max_in_flight: parse(&lookup, "FASHIONREC_MAX_IN_FLIGHT")?,
            pipeline: None,
        })
    }

    /// Parses a TOML config file.
    pub fn from_path(path: &Path) -> Result<Layer, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub data_dir: PathBuf,
    pub taxonomy: Option<PathBuf>,
    pub fixtures: Option<PathBuf>,
    pub remote: Option<String>,
    pub port: u16,
    pub remote_timeout: Duration,
    pub max_in_flight: usize,
    pub pipeline: PipelineConfig,
}

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

impl Settings {
    pub fn resolve(flags: Layer, env: Layer, file: FileConfig) -> Result<Settings, ConfigError> {
        let l = flags.or(env).or(file);
        let mut pipeline = l.pipeline.clone().unwrap_or_default();
        if let Some(k) = l.top_k {
            pipeline.top_k = k;
        }
        if let Some(p) = l.parallelism {
            pipeline.parallelism = p;
        }
        if let Some(f) = l.fallback {
            pipeline.fallback_all_clusters = f;
        }
        pipeline.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let max_in_flight = l.max_in_flight.unwrap_or(DEFAULT_MAX_IN_FLIGHT);
        if max_in_flight == 0 {
            return Err(ConfigError::Invalid("max_in_flight must be at least 1".into()));
        }
        Ok(Settings {
            data_dir: l.data_dir.unwrap_or_else(|| PathBuf::from("fashionrec-data")),
            taxonomy: l.taxonomy,
            fixtures: l.fixtures,
            remote: l.remote,
            port: l.port.unwrap_or(DEFAULT_PORT),
            remote_timeout: Duration::from_millis(l.remote_timeout_ms.unwrap_or(30_000)),
            max_in_flight,
            pipeline,
        })
    }

    /// Resolves with the process environment; the config file is the
    /// `--config` flag, else `FASHIONREC_CONFIG`, else none.
    pub fn load(flags: Layer, config_path: Option<&Path>) -> Result<Settings, ConfigError> {
        let lookup = |k: &str| std::env::var(k).ok();
        let env = Layer::from_env(lookup)?;
        let path = config_path
            .map(Path::to_path_buf)
            .or_else(|| lookup(ENV_CONFIG).filter(|p| !p.is_empty()).map(PathBuf::from));
        let file = match path {
            Some(p) => FileConfig::from_path(&p)?,
            None => FileConfig::default(),
        };
        Settings::resolve(flags, env, file)
    }
}
