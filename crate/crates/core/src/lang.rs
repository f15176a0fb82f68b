//! Language tags and the per-language tokenizer registry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifies a language by its short code plus the human-readable name used
/// when rendering translation prompts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawLanguageTag")]
pub struct LanguageTag {
    code: String,
    display_name: String,
}

#[derive(Deserialize)]
struct RawLanguageTag {
    code: String,
    display_name: String,
}

impl TryFrom<RawLanguageTag> for LanguageTag {
    type Error = Error;

    fn try_from(raw: RawLanguageTag) -> Result<Self> {
        LanguageTag::new(raw.code, raw.display_name)
    }
}

impl LanguageTag {
    /// `code` must be non-empty, lowercase, and free of whitespace;
    /// `display_name` must be non-empty.
    pub fn new(code: impl Into<String>, display_name: impl Into<String>) -> Result<Self> {
        let code = code.into();
        let display_name = display_name.into();
        if code.is_empty() {
            return Err(Error::Config("language code must be non-empty".into()));
        }
        if code.chars().any(|c| c.is_whitespace()) {
            return Err(Error::Config(format!(
                "language code '{code}' must not contain whitespace"
            )));
        }
        if code.chars().any(|c| c.is_uppercase()) {
            return Err(Error::Config(format!(
                "language code '{code}' must be lowercase"
            )));
        }
        if display_name.is_empty() {
            return Err(Error::Config(format!(
                "display name for language '{code}' must be non-empty"
            )));
        }
        Ok(Self { code, display_name })
    }

    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn display_name(&self) -> &str {
        &self.display_name
    }
}

impl std::fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.code)
    }
}

/// How raw text is segmented into tokens for a given language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segmentation {
    /// Split on Unicode whitespace, peel surrounding punctuation into
    /// standalone tokens, lowercase.
    Whitespace,
    /// One token per character, except contiguous Latin/digit runs which stay
    /// together. For languages written without word separators.
    PerCharacter,
}

/// Registry mapping language codes to tags and segmentation strategies.
///
/// Strategies are pluggable per language so a dictionary segmenter can be
/// swapped in for zh/ja without touching callers.
#[derive(Debug, Clone)]
pub struct LanguageRegistry {
    entries: BTreeMap<String, (LanguageTag, Segmentation)>,
}

impl LanguageRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Registry covering the built-in language set.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        let defaults: &[(&str, &str, Segmentation)] = &[
            ("en", "English", Segmentation::Whitespace),
            ("fr", "French", Segmentation::Whitespace),
            ("de", "German", Segmentation::Whitespace),
            ("es", "Spanish", Segmentation::Whitespace),
            ("pt", "Portuguese", Segmentation::Whitespace),
            ("zh", "Chinese", Segmentation::PerCharacter),
            ("ja", "Japanese", Segmentation::PerCharacter),
        ];
        for (code, name, seg) in defaults {
            let tag = LanguageTag::new(*code, *name).expect("builtin tags are valid");
            reg.register(tag, *seg);
        }
        reg
    }

    /// Adds or replaces a language entry.
    pub fn register(&mut self, tag: LanguageTag, segmentation: Segmentation) {
        self.entries
            .insert(tag.code().to_string(), (tag, segmentation));
    }

    pub fn contains(&self, code: &str) -> bool {
        self.entries.contains_key(code)
    }

    pub fn get(&self, code: &str) -> Result<&LanguageTag> {
        self.entries
            .get(code)
            .map(|(tag, _)| tag)
            .ok_or_else(|| Error::UnknownLanguage(code.to_string()))
    }

    pub fn segmentation(&self, code: &str) -> Result<Segmentation> {
        self.entries
            .get(code)
            .map(|(_, seg)| *seg)
            .ok_or_else(|| Error::UnknownLanguage(code.to_string()))
    }

    /// Registered tags in code order.
    pub fn tags(&self) -> impl Iterator<Item = &LanguageTag> {
        self.entries.values().map(|(tag, _)| tag)
    }
}

impl Default for LanguageRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
