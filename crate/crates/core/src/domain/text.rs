use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest vocabulary the network input layer is sized for.
pub const MAX_VOCABULARY: usize = 100;

const PUNCTUATION: [char; 4] = ['.', ',', '!', '?'];

/// Lowercases, splits on whitespace and detaches `. , ! ?` as their own tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for c in chunk.chars() {
            if PUNCTUATION.contains(&c) {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push(c.to_string());
            } else {
                word.extend(c.to_lowercase());
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    tokens
}

/// Words with per-word confidence scores, as produced by the noisy channel.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoredUtterance {
    words: Vec<String>,
    scores: Vec<f64>,
}

impl ScoredUtterance {
    /// Panics if the lengths differ or a score is outside `[0, 1]`.
    pub fn new(words: Vec<String>, scores: Vec<f64>) -> Self {
        assert_eq!(words.len(), scores.len(), "one score per word");
        assert!(
            scores.iter().all(|s| (0.0..=1.0).contains(s)),
            "confidence scores must lie in [0, 1]"
        );
        Self { words, scores }
    }

    /// Every word carries the same confidence.
    pub fn uniform(words: Vec<String>, confidence: f64) -> Self {
        let scores = vec![confidence; words.len()];
        Self::new(words, scores)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.words
            .iter()
            .map(String::as_str)
            .zip(self.scores.iter().copied())
    }

    pub fn text(&self) -> String {
        self.words.join(" ")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabularyError {
    #[error("vocabulary has {size} words, limit is {MAX_VOCABULARY}; overflow: {overflow:?}")]
    TooLarge { size: usize, overflow: Vec<String> },
    #[error("duplicate vocabulary word {0:?}")]
    Duplicate(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps the given order; rejects duplicates and oversize lists.
    pub fn from_words(words: Vec<String>) -> Result<Self, VocabularyError> {
        if words.len() > MAX_VOCABULARY {
            return Err(VocabularyError::TooLarge {
                size: words.len(),
                overflow: words[MAX_VOCABULARY..].to_vec(),
            });
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(VocabularyError::Duplicate(w.clone()));
            }
        }
        Ok(Self { words, index })
    }

    /// Lowercased, deduplicated, lexicographically sorted union of all tokens.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, VocabularyError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut words: Vec<String> = tokens
            .into_iter()
            .map(|t| t.as_ref().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        words.sort();
        words.dedup();
        Self::from_words(words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn word(&self, index: usize) -> Option<&str> {
        self.words.get(index).map(String::as_str)
    }
}

/// Builds the state vector from the last system words and the scored user words.
///
/// System words set their entry to 1; user words then overwrite with their
/// confidence, keeping the maximum over repeats. Unknown words are ignored.
pub fn featurize(system_words: &[String], user: &ScoredUtterance, vocab: &Vocabulary) -> Vec<f64> {
    let mut state: Vec<f64> = vec![0.0; vocab.len()];
    for w in system_words {
        if let Some(i) = vocab.index_of(w) {
            state[i] = 1.0;
        }
    }
    let mut seen = vec![false; vocab.len()];
    for (w, score) in user.iter() {
        if let Some(i) = vocab.index_of(w) {
            if seen[i] {
                state[i] = state[i].max(score);
            } else {
                state[i] = score;
                seen[i] = true;
            }
        }
    }
    state
}
