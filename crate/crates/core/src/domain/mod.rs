//! Restaurant-domain acts, templates, vocabulary and the word featurizer.

pub mod act;
pub mod templates;
pub mod text;
