//! The learning environment: episode loop, observations and the wire protocol.

pub mod context;
pub mod interactive;
pub mod protocol;
pub mod session;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{NaiveBayesModel, DEFAULT_APOLOGY_THRESHOLD, DEFAULT_PROBABLE_THRESHOLD};
use crate::data::{DataPack, SlotLexicon};
use crate::domain::act::CATALOG_SIZE;
use crate::domain::text::{Vocabulary, VocabularyError};
use crate::reward::{RewardConfig, RewardError};
use crate::simulator::{NoiseConfig, NoiseConfigError, UserGoal};

pub use context::{AnswerWords, DialogueContext};
pub use session::Session;

/// Read-only resources shared by every session of one language.
#[derive(Debug, Clone)]
pub struct Domain {
    pub pack: DataPack,
    pub vocab: Vocabulary,
    pub lexicon: SlotLexicon,
    pub answers: AnswerWords,
    pub model: NaiveBayesModel,
}

#[derive(Debug, Error)]
pub enum DomainError {
    #[error(transparent)]
    Vocabulary(#[from] VocabularyError),
    #[error("demonstrations: {0}")]
    Model(#[from] crate::constraints::ModelError),
}

impl Domain {
    /// Builds the vocabulary and trains the action model on the pack's
    /// demonstrations; without demonstrations every action is equally likely.
    pub fn new(pack: DataPack) -> Result<Self, DomainError> {
        let vocab = pack.build_vocabulary()?;
        let model = match &pack.demonstrations {
            Some(corpus) if !corpus.is_empty() => NaiveBayesModel::train(corpus, vocab.len())?,
            _ => NaiveBayesModel::uninformed(vocab.len(), CATALOG_SIZE),
        };
        Ok(Self::with_model(pack, vocab, model))
    }

    pub fn with_model(pack: DataPack, vocab: Vocabulary, model: NaiveBayesModel) -> Self {
        let lexicon = SlotLexicon::from_db(&pack.db);
        let answers = pack.rules.answer_words();
        Self {
            pack,
            vocab,
            lexicon,
            answers,
            model,
        }
    }

    pub fn english() -> Self {
        Self::new(DataPack::english()).expect("embedded English pack builds a domain")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub noise: NoiseConfig,
    pub reward: RewardConfig,
    pub max_turns: usize,
    /// Probability that the simulated user declines when asked for more.
    pub p_end: f64,
    pub apology_threshold: f64,
    pub probable_threshold: f64,
    /// Confidence given to every word a human types.
    pub human_confidence: f64,
    /// Withhold probable acts the context cannot carry out.
    pub executable_only: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            noise: NoiseConfig::default(),
            reward: RewardConfig::default(),
            max_turns: 30,
            p_end: 1.0,
            apology_threshold: DEFAULT_APOLOGY_THRESHOLD,
            probable_threshold: DEFAULT_PROBABLE_THRESHOLD,
            human_confidence: 1.0,
            executable_only: true,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error(transparent)]
    Noise(#[from] NoiseConfigError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("{name} = {value} is outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("max_turns must be at least 1")]
    MaxTurns,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.noise.validate()?;
        self.reward.validate()?;
        if self.max_turns == 0 {
            return Err(ConfigError::MaxTurns);
        }
        for (name, value) in [
            ("p_end", self.p_end),
            ("apology_threshold", self.apology_threshold),
            ("probable_threshold", self.probable_threshold),
            ("human_confidence", self.human_confidence),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::Probability { name, value });
            }
        }
        Ok(())
    }
}

/// What the agent sees after a reset or a system action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    /// Constrained action indices for the new state; empty once terminal.
    pub valid_actions: Vec<usize>,
    pub system_text: String,
    pub user_text: String,
    pub task_success: bool,
    pub turn: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("environment disconnected: {0}")]
    Disconnected(String),
    #[error("{reason}: {message}")]
    Rejected { reason: String, message: String },
}

impl EnvError {
    pub fn rejected(reason: &str, message: impl Into<String>) -> Self {
        Self::Rejected {
            reason: reason.to_string(),
            message: message.into(),
        }
    }

    pub fn reason(&self) -> &str {
        match self {
            EnvError::Disconnected(_) => "disconnected",
            EnvError::Rejected { reason, .. } => reason,
        }
    }
}

/// Anything that runs episodes: an in-process session or a remote server.
pub trait Environment {
    fn reset(&mut self, goal: Option<UserGoal>) -> Result<Observation, EnvError>;
    fn step(&mut self, action: usize) -> Result<Observation, EnvError>;
    /// Input width of the state vectors.
    fn state_size(&self) -> usize;
}

impl<E: Environment + ?Sized> Environment for &mut E {
    fn reset(&mut self, goal: Option<UserGoal>) -> Result<Observation, EnvError> {
        (**self).reset(goal)
    }

    fn step(&mut self, action: usize) -> Result<Observation, EnvError> {
        (**self).step(action)
    }

    fn state_size(&self) -> usize {
        (**self).state_size()
    }
}
