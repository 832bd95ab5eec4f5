//! Rule-based simulated user and the noisy channel between user and system.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, RestaurantDb};
use crate::domain::act::{DialogueAct, Slot, SlotSet};
use crate::domain::templates::{PlaceholderValues, Template};
use crate::domain::text::{tokenize, ScoredUtterance, Vocabulary};
use crate::env::context::AnswerWords;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UserGoal {
    pub food: String,
    pub price: String,
    pub area: String,
}

impl UserGoal {
    pub fn value(&self, slot: Slot) -> &str {
        match slot {
            Slot::Food => &self.food,
            Slot::Price => &self.price,
            Slot::Area => &self.area,
        }
    }

    /// Each slot drawn uniformly from the distinct values of its database column.
    pub fn sample<R: Rng + ?Sized>(db: &RestaurantDb, rng: &mut R) -> Self {
        let mut pick = |slot| {
            db.values(slot)
                .choose(rng)
                .cloned()
                .expect("restaurant database has at least one row")
        };
        Self {
            food: pick(Slot::Food),
            price: pick(Slot::Price),
            area: pick(Slot::Area),
        }
    }

    fn placeholders(&self) -> PlaceholderValues {
        PlaceholderValues {
            food: Some(self.food.clone()),
            price: Some(self.price.clone()),
            area: Some(self.area.clone()),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// Words whose confidence falls strictly below this are replaced.
    pub threshold: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("noise threshold must lie in [0, 1], got {0}")]
pub struct NoiseConfigError(pub f64);

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), NoiseConfigError> {
        if (0.0..=1.0).contains(&self.threshold) {
            Ok(())
        } else {
            Err(NoiseConfigError(self.threshold))
        }
    }
}

/// What the system just said, as far as the user can tell: the act and
/// the slot values it asserted (for confirmations).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemTurn {
    pub act: DialogueAct,
    pub asserted: [Option<String>; 3],
}

impl SystemTurn {
    pub fn new(act: DialogueAct) -> Self {
        Self {
            act,
            asserted: Default::default(),
        }
    }

    pub fn asserting(act: DialogueAct, asserted: [Option<String>; 3]) -> Self {
        Self { act, asserted }
    }
}

const SPECIAL_KEYS: [&str; 4] = ["affirm", "negate", "decline", "new_task"];

/// Response templates keyed by request act or by one of
/// `affirm`, `negate`, `decline`, `new_task`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulatorRules {
    requests: HashMap<DialogueAct, Template>,
    special: HashMap<&'static str, Template>,
    raw: Vec<String>,
}

impl SimulatorRules {
    pub fn parse(source: &str, text: &str) -> Result<Self, DataError> {
        let mut requests = HashMap::new();
        let mut special = HashMap::new();
        let mut raw = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let err = |message: String| DataError::at(source, n + 1, message);
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('\t')
                .ok_or_else(|| err("expected <key>\\t<template>".to_string()))?;
            let template = Template::parse(value.trim()).map_err(err)?;
            if let Some(k) = SPECIAL_KEYS.iter().find(|k| **k == key) {
                special.insert(*k, template);
            } else {
                let act: DialogueAct = key.parse().map_err(|e| err(format!("{e}")))?;
                if !matches!(act, DialogueAct::Request(_) | DialogueAct::RequestHmihy) {
                    return Err(err(format!("rules are keyed by Request acts, got {act}")));
                }
                requests.insert(act, template);
            }
            raw.push(value.trim().to_string());
        }
        let mut missing: Vec<String> = SPECIAL_KEYS
            .iter()
            .filter(|k| !special.contains_key(*k))
            .map(|k| k.to_string())
            .collect();
        let request_acts = SlotSet::COMBINATIONS
            .iter()
            .map(|s| DialogueAct::Request(*s))
            .chain([DialogueAct::RequestHmihy]);
        missing.extend(
            request_acts
                .filter(|a| !requests.contains_key(a))
                .map(|a| a.to_string()),
        );
        if !missing.is_empty() {
            return Err(DataError::at(
                source,
                0,
                format!("missing rules: {}", missing.join(", ")),
            ));
        }
        Ok(Self {
            requests,
            special,
            raw,
        })
    }

    pub fn raw_templates(&self) -> &[String] {
        &self.raw
    }

    /// Tokens of the affirm template, and of the negate and decline templates.
    pub fn answer_words(&self) -> AnswerWords {
        let literal = |key: &str| {
            tokenize(
                &self.special[key]
                    .render(&PlaceholderValues::default(), false)
                    .unwrap_or_default(),
            )
        };
        let mut negate = literal("negate");
        negate.extend(literal("decline"));
        negate.sort();
        negate.dedup();
        AnswerWords {
            affirm: literal("affirm"),
            negate,
        }
    }

    fn render(&self, template: &Template, goal: &UserGoal) -> Vec<String> {
        let text = template
            .render(&goal.placeholders(), false)
            .expect("lenient rendering cannot fail");
        tokenize(&text)
    }

    fn supply(&self, slots: SlotSet, goal: &UserGoal) -> Vec<String> {
        self.render(&self.requests[&DialogueAct::Request(slots)], goal)
    }

    fn special(&self, key: &str, goal: &UserGoal) -> Vec<String> {
        self.render(&self.special[key], goal)
    }
}

/// A rule-based user with a goal for the current episode.
#[derive(Debug, Clone)]
pub struct UserSimulator {
    goal: UserGoal,
    /// Probability of declining when asked for anything else.
    p_end: f64,
}

impl UserSimulator {
    pub fn new(goal: UserGoal, p_end: f64) -> Self {
        Self { goal, p_end }
    }

    pub fn goal(&self) -> &UserGoal {
        &self.goal
    }

    /// Word sequence answering `turn`. A new task replaces the goal.
    pub fn respond<R: Rng + ?Sized>(
        &mut self,
        rules: &SimulatorRules,
        db: &RestaurantDb,
        turn: &SystemTurn,
        rng: &mut R,
    ) -> Vec<String> {
        match turn.act {
            DialogueAct::RequestHmihy => {
                rules.render(&rules.requests[&DialogueAct::RequestHmihy], &self.goal)
            }
            DialogueAct::Request(slots) | DialogueAct::Apology(slots) => {
                rules.supply(slots, &self.goal)
            }
            DialogueAct::ExpConfirm(slots) => {
                let wrong = self.mismatched(slots, turn);
                if wrong.is_empty() {
                    rules.special("affirm", &self.goal)
                } else {
                    self.correction(rules, wrong)
                }
            }
            DialogueAct::ImpConfirm(slots) => {
                let wrong = self.mismatched(slots, turn);
                if wrong.is_empty() {
                    Vec::new()
                } else {
                    self.correction(rules, wrong)
                }
            }
            DialogueAct::AskForMore => {
                if rng.gen::<f64>() < self.p_end {
                    rules.special("decline", &self.goal)
                } else {
                    self.goal = UserGoal::sample(db, rng);
                    rules.special("new_task", &self.goal)
                }
            }
            DialogueAct::Greeting
            | DialogueAct::Closing
            | DialogueAct::RetrieveInfo
            | DialogueAct::ProvideKnown
            | DialogueAct::ProvideUnknown => Vec::new(),
        }
    }

    fn mismatched(&self, slots: SlotSet, turn: &SystemTurn) -> SlotSet {
        slots
            .iter()
            .filter(|s| turn.asserted[s.index()].as_deref() != Some(self.goal.value(*s)))
            .collect()
    }

    fn correction(&self, rules: &SimulatorRules, wrong: SlotSet) -> Vec<String> {
        let mut words = rules.special("negate", &self.goal);
        words.extend(rules.supply(wrong, &self.goal));
        words
    }
}

/// Gives each word a Uniform[0,1) confidence; when noise is enabled, words
/// scoring strictly below the threshold are swapped for a different,
/// uniformly chosen vocabulary word that keeps the low score.
pub fn distort<R: Rng + ?Sized>(
    words: &[String],
    noise: &NoiseConfig,
    vocab: &Vocabulary,
    rng: &mut R,
) -> ScoredUtterance {
    let mut out_words = Vec::with_capacity(words.len());
    let mut scores = Vec::with_capacity(words.len());
    for w in words {
        let score: f64 = rng.gen();
        let mut word = w.clone();
        if noise.enabled && score < noise.threshold {
            if let Some(replacement) = replacement(w, vocab, rng) {
                word = replacement;
            }
        }
        out_words.push(word);
        scores.push(score);
    }
    ScoredUtterance::new(out_words, scores)
}

fn replacement<R: Rng + ?Sized>(word: &str, vocab: &Vocabulary, rng: &mut R) -> Option<String> {
    match vocab.index_of(word) {
        Some(own) if vocab.len() >= 2 => {
            // Draw from the other len-1 words.
            let mut i = rng.gen_range(0..vocab.len() - 1);
            if i >= own {
                i += 1;
            }
            vocab.word(i).map(str::to_string)
        }
        Some(_) => None,
        None if vocab.is_empty() => None,
        None => vocab
            .word(rng.gen_range(0..vocab.len()))
            .map(str::to_string),
    }
}
