//! Config file loading, flag overrides and error classes.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::anyhow;
use clap::{Args, ValueEnum};
use simpleds_core::config::Config;
use simpleds_core::{Domain, Policy};

#[derive(Debug)]
pub enum Failure {
    Data(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Data(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Data(e) | Failure::Runtime(e) => e,
        }
    }
}

pub trait Classify<T> {
    fn data(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn data(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Data(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Debug, Args)]
pub struct Common {
    /// TOML config file; defaults apply to anything it leaves out.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice of the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulated recognition noise.
    #[arg(long, value_enum)]
    pub noise: Option<Switch>,
    /// Language of the built-in data pack.
    #[arg(long)]
    pub lang: Option<String>,
    /// Directory with a data pack, instead of the built-in one.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
}

impl Common {
    /// Loads the config file, applies the flags and validates the result.
    pub fn config(&self, edit: impl FnOnce(&mut Config)) -> Result<Config, Failure> {
        let mut config = match &self.config {
            Some(path) => Config::load(path).data()?,
            None => Config::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(noise) = self.noise {
            config.noise.enabled = noise == Switch::On;
        }
        if let Some(lang) = &self.lang {
            config.data.lang = lang.clone();
        }
        if let Some(dir) = &self.data {
            config.data.dir = Some(dir.clone());
        }
        edit(&mut config);
        let source = self
            .config
            .as_ref()
            .map_or_else(|| "command line".to_string(), |p| p.display().to_string());
        config.validate(&source).data()?;
        Ok(config)
    }
}

pub fn domain(config: &Config) -> Result<Arc<Domain>, Failure> {
    let pack = config.data_pack().data()?;
    Ok(Arc::new(Domain::new(pack).data()?))
}

/// Loads a policy and checks it reads the domain's vocabulary.
pub fn policy(path: &std::path::Path, domain: &Domain) -> Result<Policy, Failure> {
    let policy = Policy::load(path).data()?;
    policy
        .check(&domain.vocab)
        .map_err(|e| Failure::Data(anyhow!("{}: {e}", path.display())))?;
    Ok(policy)
}
