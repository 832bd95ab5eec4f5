//! TOML run configuration. Every section is optional; omitted keys keep defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, DataPack};
use crate::dqn::{HyperParamError, HyperParams};
use crate::env::{ConfigError, EnvConfig};
use crate::reward::RewardConfig;
use crate::simulator::NoiseConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DialogueConfig {
    pub max_turns: usize,
    pub p_end: f64,
    pub apology_threshold: f64,
    pub probable_threshold: f64,
    pub human_confidence: f64,
    pub executable_only: bool,
}

impl Default for DialogueConfig {
    fn default() -> Self {
        let env = EnvConfig::default();
        Self {
            max_turns: env.max_turns,
            p_end: env.p_end,
            apology_threshold: env.apology_threshold,
            probable_threshold: env.probable_threshold,
            human_confidence: env.human_confidence,
            executable_only: env.executable_only,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub host: String,
    /// Newline-delimited JSON over TCP.
    pub port: u16,
    /// Same messages over WebSocket, plus the HTTP endpoints.
    pub ws_port: u16,
    pub human_timeout_secs: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".to_string(),
            port: 7700,
            ws_port: 7701,
            human_timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub lang: String,
    /// Directory holding a data pack; the built-in pack is used when unset.
    pub dir: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            lang: "en".to_string(),
            dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub policy: PathBuf,
    pub curve: PathBuf,
    pub transcript: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            policy: PathBuf::from("policy.bin"),
            curve: PathBuf::from("curve.csv"),
            transcript: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub learning: HyperParams,
    pub reward: RewardConfig,
    pub noise: NoiseConfig,
    pub dialogue: DialogueConfig,
    pub server: ServerConfig,
    pub data: DataConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Syntax {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: [learning] {source}")]
    Learning {
        path: String,
        #[source]
        source: HyperParamError,
    },
    #[error("{path}: {source}")]
    Environment {
        path: String,
        #[source]
        source: ConfigError,
    },
    #[error("no built-in data pack for language {0:?}; set [data] dir")]
    Language(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

impl Config {
    pub fn parse(path: &str, text: &str) -> Result<Self, ConfigFileError> {
        let config: Config = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| {
                text[..s.start.min(text.len())].matches('\n').count() + 1
            });
            ConfigFileError::Syntax {
                path: path.to_string(),
                line,
                message: e.message().to_string(),
            }
        })?;
        config.validate(path)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&path.display().to_string(), &text)
    }

    pub fn validate(&self, path: &str) -> Result<(), ConfigFileError> {
        self.learning
            .validate()
            .map_err(|source| ConfigFileError::Learning {
                path: path.to_string(),
                source,
            })?;
        self.env_config()
            .validate()
            .map_err(|source| ConfigFileError::Environment {
                path: path.to_string(),
                source,
            })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            noise: self.noise,
            reward: self.reward,
            max_turns: self.dialogue.max_turns,
            p_end: self.dialogue.p_end,
            apology_threshold: self.dialogue.apology_threshold,
            probable_threshold: self.dialogue.probable_threshold,
            human_confidence: self.dialogue.human_confidence,
            executable_only: self.dialogue.executable_only,
        }
    }

    /// The configured data pack: a directory if set, else the built-in language.
    pub fn data_pack(&self) -> Result<DataPack, ConfigFileError> {
        match &self.data.dir {
            Some(dir) => Ok(DataPack::load(dir)?),
            None if self.data.lang == "en" => Ok(DataPack::english()),
            None => Err(ConfigFileError::Language(self.data.lang.clone())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::parse("c.toml", "").unwrap(), Config::default());
    }

    #[test]
    fn sections_override_defaults() {
        let c = Config::parse(
            "c.toml",
            "seed = 9\n[learning]\ngamma = 0.5\n[noise]\nenabled = false\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.learning.gamma, 0.5);
        assert!(!c.noise.enabled);
        assert_eq!(c.learning.batch_size, 32);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Config::parse("c.toml", "seed = 1\n[learning]\nbogus = 3\n").unwrap_err();
        assert!(
            matches!(err, ConfigFileError::Syntax { line: 3, .. }),
            "{err}"
        );
        let err = Config::parse("c.toml", "[learning]\ngamma = 1.5\n").unwrap_err();
        assert!(matches!(err, ConfigFileError::Learning { .. }));
    }

    #[test]
    fn round_trips_through_toml() {
        let c = Config::default();
        assert_eq!(Config::parse("c.toml", &c.to_toml()).unwrap(), c);
    }
}
