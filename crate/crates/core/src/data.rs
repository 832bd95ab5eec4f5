//! Data packs: templates, simulator rules, restaurant database and demonstrations.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::DemonstrationCorpus;
use crate::domain::act::Slot;
use crate::domain::templates::{literal_text, TemplateSet};
use crate::domain::text::{tokenize, Vocabulary, VocabularyError};
use crate::simulator::SimulatorRules;

/// A problem in a data file; `line` is 1-based, 0 when the whole file is at fault.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("{source_name}:{line}: {message}")]
pub struct DataError {
    pub source_name: String,
    pub line: usize,
    pub message: String,
}

impl DataError {
    pub fn at(source: &str, line: usize, message: impl Into<String>) -> Self {
        Self {
            source_name: source.to_string(),
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Restaurant {
    pub name: String,
    pub food: String,
    pub price: String,
    pub area: String,
    pub location: String,
}

impl Restaurant {
    pub fn value(&self, slot: Slot) -> &str {
        match slot {
            Slot::Food => &self.food,
            Slot::Price => &self.price,
            Slot::Area => &self.area,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RestaurantDb {
    rows: Vec<Restaurant>,
}

impl RestaurantDb {
    pub const HEADER: [&'static str; 5] = ["name", "food", "price", "area", "location"];

    pub fn new(rows: Vec<Restaurant>) -> Self {
        Self { rows }
    }

    /// Parses comma-separated text whose header is `name,food,price,area,location`.
    pub fn parse(source: &str, text: &str) -> Result<Self, DataError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| DataError::at(source, 1, e.to_string()))?
            .clone();
        if header.iter().collect::<Vec<_>>() != Self::HEADER {
            return Err(DataError::at(
                source,
                1,
                format!("expected header {}", Self::HEADER.join(",")),
            ));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                DataError::at(source, line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let field = |i: usize| -> Result<String, DataError> {
                let v = record.get(i).unwrap_or("").to_lowercase();
                if v.is_empty() {
                    Err(DataError::at(
                        source,
                        line,
                        format!("empty {} field", Self::HEADER[i]),
                    ))
                } else {
                    Ok(v)
                }
            };
            rows.push(Restaurant {
                name: field(0)?,
                food: field(1)?,
                price: field(2)?,
                area: field(3)?,
                location: field(4)?,
            });
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Restaurant] {
        &self.rows
    }

    /// Distinct values of a slot column, in first-seen order.
    pub fn values(&self, slot: Slot) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            let v = r.value(slot);
            if !out.iter().any(|o| o == v) {
                out.push(v.to_string());
            }
        }
        out
    }

    /// First restaurant matching every given value.
    pub fn lookup(&self, food: &str, price: &str, area: &str) -> Option<&Restaurant> {
        self.rows
            .iter()
            .find(|r| r.food == food && r.price == price && r.area == area)
    }
}

/// Token-level value lexicon used to fill slots from user words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotLexicon {
    /// (slot, value, value tokens), longest values first.
    entries: Vec<(Slot, String, Vec<String>)>,
}

/// A slot value recognised in a scored utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotMatch {
    pub slot: Slot,
    pub value: String,
    pub confidence: f64,
}

impl SlotLexicon {
    pub fn from_db(db: &RestaurantDb) -> Self {
        let mut entries: Vec<(Slot, String, Vec<String>)> = Slot::ALL
            .iter()
            .flat_map(|&slot| db.values(slot).into_iter().map(move |v| (slot, v)))
            .map(|(slot, v)| {
                let toks = tokenize(&v);
                (slot, v, toks)
            })
            .collect();
        entries.sort_by_key(|e| std::cmp::Reverse(e.2.len()));
        Self { entries }
    }

    /// Greedy longest-first scan; a value's confidence is the mean of its word scores.
    pub fn scan<'a, I>(&self, words: I) -> Vec<SlotMatch>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let items: Vec<(&str, f64)> = words.into_iter().collect();
        let mut found = Vec::new();
        let mut i = 0;
        while i < items.len() {
            let hit = self.entries.iter().find(|(_, _, toks)| {
                toks.len() <= items.len() - i
                    && toks.iter().zip(&items[i..]).all(|(t, (w, _))| t == w)
            });
            match hit {
                Some((slot, value, toks)) => {
                    let n = toks.len();
                    let confidence = items[i..i + n].iter().map(|(_, s)| s).sum::<f64>() / n as f64;
                    found.push(SlotMatch {
                        slot: *slot,
                        value: value.clone(),
                        confidence,
                    });
                    i += n;
                }
                None => i += 1,
            }
        }
        found
    }
}

/// Everything the environment needs for one language, as parsed from files.
#[derive(Debug, Clone)]
pub struct DataPack {
    pub templates: TemplateSet,
    pub rules: SimulatorRules,
    pub db: RestaurantDb,
    pub demonstrations: Option<DemonstrationCorpus>,
}

pub const TEMPLATES_FILE: &str = "templates.tsv";
pub const RULES_FILE: &str = "simulator.tsv";
pub const DB_FILE: &str = "restaurants.csv";
pub const DEMONSTRATIONS_FILE: &str = "demonstrations.json";

mod english {
    pub const TEMPLATES: &str = include_str!("../data/en/templates.tsv");
    pub const RULES: &str = include_str!("../data/en/simulator.tsv");
    pub const DB: &str = include_str!("../data/en/restaurants.csv");
    pub const DEMONSTRATIONS: &str = include_str!("../data/en/demonstrations.json");
}

impl DataPack {
    /// The English pack compiled into the library.
    pub fn english() -> Self {
        Self::from_texts(
            english::TEMPLATES,
            english::RULES,
            english::DB,
            Some(english::DEMONSTRATIONS),
        )
        .expect("embedded English data pack is valid")
    }

    pub fn from_texts(
        templates: &str,
        rules: &str,
        db: &str,
        demonstrations: Option<&str>,
    ) -> Result<Self, DataError> {
        let templates = TemplateSet::parse(TEMPLATES_FILE, templates)?;
        let missing = templates.missing_acts();
        if !missing.is_empty() {
            return Err(DataError::at(
                TEMPLATES_FILE,
                0,
                format!(
                    "no template for {}",
                    missing
                        .iter()
                        .map(ToString::to_string)
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            ));
        }
        let rules = SimulatorRules::parse(RULES_FILE, rules)?;
        let db = RestaurantDb::parse(DB_FILE, db)?;
        let demonstrations = demonstrations
            .map(|t| DemonstrationCorpus::parse(DEMONSTRATIONS_FILE, t))
            .transpose()?;
        Ok(Self {
            templates,
            rules,
            db,
            demonstrations,
        })
    }

    /// Loads the four pack files from a directory; the demonstration file is optional.
    pub fn load(dir: &Path) -> Result<Self, DataError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| DataError::at(&dir.join(name).display().to_string(), 0, e.to_string()))
        };
        let demos_path = dir.join(DEMONSTRATIONS_FILE);
        let demos = if demos_path.exists() {
            Some(read(DEMONSTRATIONS_FILE)?)
        } else {
            None
        };
        Self::from_texts(
            &read(TEMPLATES_FILE)?,
            &read(RULES_FILE)?,
            &read(DB_FILE)?,
            demos.as_deref(),
        )
    }

    /// Every token appearing in a template, simulator rule or database value.
    pub fn tokens(&self) -> Vec<String> {
        let mut tokens = Vec::new();
        for t in self
            .templates
            .raw_templates()
            .iter()
            .chain(self.rules.raw_templates())
        {
            let text = literal_text(t).expect("templates were validated at parse time");
            tokens.extend(tokenize(&text));
        }
        for r in self.db.rows() {
            for field in [&r.name, &r.food, &r.price, &r.area, &r.location] {
                tokens.extend(tokenize(field));
            }
        }
        tokens
    }

    pub fn build_vocabulary(&self) -> Result<Vocabulary, VocabularyError> {
        Vocabulary::from_tokens(self.tokens())
    }
}

impl fmt::Display for Restaurant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} {} {}, {})",
            self.name, self.price, self.food, self.area, self.location
        )
    }
}
