//! Template-based generation of system utterances.

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use super::act::{DialogueAct, CATALOG};
use super::text::tokenize;
use crate::data::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placeholder {
    Food,
    Price,
    Area,
    Name,
    Location,
}

impl Placeholder {
    pub const ALL: [Placeholder; 5] = [
        Placeholder::Food,
        Placeholder::Price,
        Placeholder::Area,
        Placeholder::Name,
        Placeholder::Location,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Placeholder::Food => "food",
            Placeholder::Price => "price",
            Placeholder::Area => "area",
            Placeholder::Name => "name",
            Placeholder::Location => "location",
        }
    }

    fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

/// Values available for placeholder substitution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlaceholderValues {
    pub food: Option<String>,
    pub price: Option<String>,
    pub area: Option<String>,
    pub name: Option<String>,
    pub location: Option<String>,
}

impl PlaceholderValues {
    pub fn get(&self, p: Placeholder) -> Option<&str> {
        match p {
            Placeholder::Food => self.food.as_deref(),
            Placeholder::Price => self.price.as_deref(),
            Placeholder::Area => self.area.as_deref(),
            Placeholder::Name => self.name.as_deref(),
            Placeholder::Location => self.location.as_deref(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("no template for {0}")]
    NoTemplate(DialogueAct),
    #[error("no value for placeholder {{{}}} in template for {act}", slot.name())]
    MissingValue { act: DialogueAct, slot: Placeholder },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Piece {
    Text(String),
    Hole(Placeholder),
}

/// Parses `{name}` placeholders; returns an error message for unknown or unclosed ones.
pub(crate) fn parse_pieces(template: &str) -> Result<Vec<Piece>, String> {
    let mut pieces = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            pieces.push(Piece::Text(rest[..open].to_string()));
        }
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| format!("unclosed placeholder in {template:?}"))?;
        let name = &rest[open + 1..open + close];
        let hole =
            Placeholder::parse(name).ok_or_else(|| format!("unknown placeholder {{{name}}}"))?;
        pieces.push(Piece::Hole(hole));
        rest = &rest[open + close + 1..];
    }
    if !rest.is_empty() {
        pieces.push(Piece::Text(rest.to_string()));
    }
    Ok(pieces)
}

/// Text of a template with every placeholder removed; used for vocabulary building.
pub(crate) fn literal_text(template: &str) -> Result<String, String> {
    Ok(parse_pieces(template)?
        .into_iter()
        .map(|p| match p {
            Piece::Text(t) => t,
            Piece::Hole(_) => " ".to_string(),
        })
        .collect())
}

/// A parsed template string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    raw: String,
    pieces: Vec<Piece>,
}

impl Template {
    pub fn parse(text: &str) -> Result<Self, String> {
        Ok(Self {
            raw: text.to_string(),
            pieces: parse_pieces(text)?,
        })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    /// Substitutes values; in lenient mode placeholders without a value are
    /// dropped, otherwise the first missing one is returned as the error.
    pub fn render(&self, values: &PlaceholderValues, strict: bool) -> Result<String, Placeholder> {
        let mut out = String::new();
        for piece in &self.pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Hole(p) => match values.get(*p) {
                    Some(v) => out.push_str(v),
                    None if strict => return Err(*p),
                    None => {}
                },
            }
        }
        Ok(out.split_whitespace().collect::<Vec<_>>().join(" "))
    }
}

/// One or more surface templates per act, for a single language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    lang: String,
    entries: HashMap<DialogueAct, Vec<Template>>,
    raw: Vec<String>,
}

impl TemplateSet {
    /// Parses `<act>\t<template>` lines; `#` starts a comment and
    /// `@lang\t<code>` names the language.
    pub fn parse(source: &str, text: &str) -> Result<Self, DataError> {
        let mut lang = None;
        let mut entries: HashMap<DialogueAct, Vec<Template>> = HashMap::new();
        let mut raw = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let err = |message: String| DataError::at(source, n + 1, message);
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('\t')
                .ok_or_else(|| err("expected <act>\\t<template>".to_string()))?;
            if key == "@lang" {
                lang = Some(value.trim().to_string());
                continue;
            }
            let act: DialogueAct = key.parse().map_err(|e| err(format!("{e}")))?;
            let template = Template::parse(value.trim()).map_err(err)?;
            entries.entry(act).or_default().push(template);
            raw.push(value.trim().to_string());
        }
        let lang =
            lang.ok_or_else(|| DataError::at(source, 0, "missing @lang line".to_string()))?;
        Ok(Self { lang, entries, raw })
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    /// Raw template strings in file order.
    pub fn raw_templates(&self) -> &[String] {
        &self.raw
    }

    /// Acts in the catalog that lack a template.
    pub fn missing_acts(&self) -> Vec<DialogueAct> {
        CATALOG
            .iter()
            .filter(|a| !self.entries.contains_key(a))
            .copied()
            .collect()
    }

    fn choose<R: Rng + ?Sized>(
        &self,
        act: DialogueAct,
        rng: &mut R,
    ) -> Result<&Template, TemplateError> {
        let options = self
            .entries
            .get(&act)
            .filter(|o| !o.is_empty())
            .ok_or(TemplateError::NoTemplate(act))?;
        let i = if options.len() == 1 {
            0
        } else {
            rng.gen_range(0..options.len())
        };
        Ok(&options[i])
    }

    /// Surface string for `act`; every placeholder must have a value.
    pub fn realize<R: Rng + ?Sized>(
        &self,
        act: DialogueAct,
        values: &PlaceholderValues,
        rng: &mut R,
    ) -> Result<String, TemplateError> {
        self.choose(act, rng)?
            .render(values, true)
            .map_err(|slot| TemplateError::MissingValue { act, slot })
    }

    /// Like [`TemplateSet::realize`] but drops placeholders without a value.
    pub fn realize_lenient<R: Rng + ?Sized>(
        &self,
        act: DialogueAct,
        values: &PlaceholderValues,
        rng: &mut R,
    ) -> Result<String, TemplateError> {
        Ok(self
            .choose(act, rng)?
            .render(values, false)
            .expect("lenient rendering cannot fail"))
    }

    /// Tokenised realisation of `act`.
    pub fn verbalize<R: Rng + ?Sized>(
        &self,
        act: DialogueAct,
        values: &PlaceholderValues,
        rng: &mut R,
    ) -> Result<Vec<String>, TemplateError> {
        Ok(tokenize(&self.realize(act, values, rng)?))
    }
}
