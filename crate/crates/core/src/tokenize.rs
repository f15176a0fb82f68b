//! Tokenization of raw text into token sequences for n-gram and LCS work.
//!
//! Two strategies exist. Whitespace-delimited languages split on Unicode
//! whitespace, peel surrounding punctuation into standalone tokens, and
//! lowercase. Languages written without word separators (zh, ja) are
//! segmented per character, keeping contiguous Latin/digit runs intact.
//! Both are deterministic pure functions of their input.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lang::{LanguageRegistry, LanguageTag, Segmentation};

/// A tokenized text together with the language it was tokenized as.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<String>,
    language: LanguageTag,
}

impl TokenSequence {
    /// Rejects empty token strings; an empty token list is fine.
    pub fn new(tokens: Vec<String>, language: LanguageTag) -> Result<Self> {
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::Usage(
                "token sequences must not contain empty tokens".into(),
            ));
        }
        Ok(Self { tokens, language })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn language(&self) -> &LanguageTag {
        &self.language
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl LanguageRegistry {
    /// Tokenizes `text` with the strategy registered for `language`.
    ///
    /// Empty input yields an empty sequence, never an error. Unknown
    /// languages are a configuration error naming the tag.
    pub fn tokenize(&self, text: &str, language: &LanguageTag) -> Result<TokenSequence> {
        let segmentation = self.segmentation(language.code())?;
        let tokens = match segmentation {
            Segmentation::Whitespace => whitespace_tokens(text),
            Segmentation::PerCharacter => per_character_tokens(text),
        };
        TokenSequence::new(tokens, language.clone())
    }

    /// Convenience: resolve `code` in the registry, then tokenize.
    pub fn tokenize_code(&self, text: &str, code: &str) -> Result<TokenSequence> {
        let tag = self.get(code)?.clone();
        self.tokenize(text, &tag)
    }
}

/// Punctuation peeled off token edges by the whitespace strategy. ASCII
/// punctuation plus the common Unicode punctuation blocks and a few Latin
/// script marks; interior punctuation (don't, well-known) is left alone.
fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || ('\u{2010}'..='\u{2027}').contains(&c)
        || ('\u{2030}'..='\u{205E}').contains(&c)
        || matches!(
            c,
            '\u{00A1}' | '\u{00BF}' | '\u{00AB}' | '\u{00BB}' | '\u{00B7}'
        )
        || matches!(
            c,
            '\u{3001}' | '\u{3002}' | '\u{FF01}' | '\u{FF08}' | '\u{FF09}' | '\u{FF0C}'
                | '\u{FF1A}' | '\u{FF1B}' | '\u{FF1F}' | '\u{300C}' | '\u{300D}' | '\u{300E}'
                | '\u{300F}' | '\u{3008}' | '\u{3009}' | '\u{300A}' | '\u{300B}'
        )
}

fn whitespace_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        while start < end && is_punctuation(chars[start]) {
            start += 1;
        }
        while end > start && is_punctuation(chars[end - 1]) {
            end -= 1;
        }
        for &c in &chars[..start] {
            out.push(c.to_string());
        }
        if start < end {
            let core: String = chars[start..end].iter().collect();
            out.push(core.to_lowercase());
        }
        for &c in &chars[end..] {
            out.push(c.to_string());
        }
    }
    out
}

fn is_latin_or_digit(c: char) -> bool {
    c.is_ascii_alphanumeric()
        || (('\u{00C0}'..='\u{024F}').contains(&c) && c.is_alphabetic())
}

fn per_character_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut run = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            flush_run(&mut run, &mut out);
        } else if is_latin_or_digit(c) {
            run.push(c);
        } else {
            flush_run(&mut run, &mut out);
            out.push(c.to_string());
        }
    }
    flush_run(&mut run, &mut out);
    out
}

fn flush_run(run: &mut String, out: &mut Vec<String>) {
    if !run.is_empty() {
        out.push(run.to_lowercase());
        run.clear();
    }
}

/// Multiset of contiguous `n`-token windows with their occurrence counts.
/// A sequence of length `L` yields `max(0, L - n + 1)` n-grams in total.
pub fn ngrams(seq: &TokenSequence, n: usize) -> HashMap<&[String], usize> {
    assert!(n >= 1, "n-gram order must be >= 1");
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    if seq.len() >= n {
        for window in seq.tokens().windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}
