//! Translation as a pluggable capability: an HTTP client for
//! OpenAI-compatible chat endpoints, a deterministic noisy-channel mock for
//! offline work, and a persistent cache that wraps either.

mod cache;
mod http;
mod mock;

pub use cache::{clear_store, store_stats, CachedBackend};
pub use http::{HttpBackend, HttpConfig, DEFAULT_PROMPT_TEMPLATE};
pub use mock::{MockBackend, NoiseConfig};

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BackendError, Error, Result};
use crate::lang::LanguageTag;

/// Decoding hyper-parameters for one model call: temperature, optional
/// seed, and sampling knobs. All of them participate in cache keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_beams: Option<u32>,
}

impl DecodeParams {
    pub fn greedy() -> Self {
        Self {
            temperature: 0.0,
            seed: None,
            top_k: None,
            num_beams: None,
        }
    }

    pub fn with_temperature(temperature: f64) -> Self {
        Self {
            temperature,
            ..Self::greedy()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            ))
            .into());
        }
        if self.top_k == Some(0) {
            return Err(BackendError::InvalidRequest("top_k must be >= 1".into()).into());
        }
        if self.num_beams == Some(0) {
            return Err(BackendError::InvalidRequest("num_beams must be >= 1".into()).into());
        }
        Ok(())
    }

    /// Canonical text form used in cache keys. Stable across runs and
    /// platforms: field order is fixed and floats use shortest round-trip
    /// formatting.
    pub fn canonical_string(&self) -> String {
        fn opt(v: Option<impl std::fmt::Display>) -> String {
            v.map_or_else(|| "-".to_string(), |x| x.to_string())
        }
        format!(
            "temp={};seed={};top_k={};beams={}",
            self.temperature,
            opt(self.seed),
            opt(self.top_k),
            opt(self.num_beams)
        )
    }
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self::greedy()
    }
}

/// One unit of translation work handed to a backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub text: String,
    pub source: LanguageTag,
    pub target: LanguageTag,
    pub params: DecodeParams,
    pub model: String,
}

impl TranslationRequest {
    /// Checks the request invariants. Identical source and target languages
    /// are rejected unless `allow_identity` is set.
    pub fn validate(&self, allow_identity: bool) -> Result<()> {
        if self.text.is_empty() {
            return Err(BackendError::InvalidRequest("text must be non-empty".into()).into());
        }
        if !allow_identity && self.source.code() == self.target.code() {
            return Err(BackendError::InvalidRequest(format!(
                "source and target are both '{}'; same-language translation is disabled",
                self.source.code()
            ))
            .into());
        }
        self.params.validate()
    }
}

/// A model identity together with its parameter count, the unit of the
/// compute-cost bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub parameter_count: f64,
}

impl ModelInfo {
    pub fn new(name: impl Into<String>, parameter_count: f64) -> Result<Self> {
        if parameter_count.is_nan() || parameter_count <= 0.0 {
            return Err(Error::Config(format!(
                "parameter_count must be > 0, got {parameter_count}"
            )));
        }
        Ok(Self {
            name: name.into(),
            parameter_count,
        })
    }
}

/// Anything that can translate text. Implementations must be safe for
/// concurrent `translate` calls; the pipeline fans out candidates in
/// parallel.
pub trait TranslationBackend: Send + Sync {
    fn translate(&self, request: &TranslationRequest) -> std::result::Result<String, BackendError>;
}

impl<T: TranslationBackend + ?Sized> TranslationBackend for &T {
    fn translate(&self, request: &TranslationRequest) -> std::result::Result<String, BackendError> {
        (**self).translate(request)
    }
}

impl<T: TranslationBackend + ?Sized> TranslationBackend for Box<T> {
    fn translate(&self, request: &TranslationRequest) -> std::result::Result<String, BackendError> {
        (**self).translate(request)
    }
}

impl<T: TranslationBackend + ?Sized> TranslationBackend for Arc<T> {
    fn translate(&self, request: &TranslationRequest) -> std::result::Result<String, BackendError> {
        (**self).translate(request)
    }
}

/// Wrapper counting how many calls reach the inner backend. Used to verify
/// cache hits perform zero inner invocations.
pub struct CountingBackend<B> {
    inner: B,
    calls: Arc<AtomicU64>,
}

impl<B: TranslationBackend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            calls: Arc::new(AtomicU64::new(0)),
        }
    }

    /// Handle that stays readable after the wrapper is moved elsewhere.
    pub fn counter(&self) -> Arc<AtomicU64> {
        Arc::clone(&self.calls)
    }
}

impl<B: TranslationBackend> TranslationBackend for CountingBackend<B> {
    fn translate(&self, request: &TranslationRequest) -> std::result::Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.translate(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::LanguageRegistry;

    fn tag(code: &str) -> LanguageTag {
        LanguageRegistry::builtin().get(code).unwrap().clone()
    }

    fn request(text: &str) -> TranslationRequest {
        TranslationRequest {
            text: text.to_string(),
            source: tag("en"),
            target: tag("fr"),
            params: DecodeParams::greedy(),
            model: "test-model".into(),
        }
    }

    #[test]
    fn empty_text_is_rejected() {
        assert!(request("").validate(false).is_err());
        assert!(request("hi").validate(false).is_ok());
    }

    #[test]
    fn identity_pair_rejected_unless_allowed() {
        let mut req = request("hi");
        req.target = tag("en");
        assert!(req.validate(false).is_err());
        assert!(req.validate(true).is_ok());
    }

    #[test]
    fn decode_params_invariants() {
        assert!(DecodeParams::with_temperature(-0.1).validate().is_err());
        let mut p = DecodeParams::greedy();
        p.top_k = Some(0);
        assert!(p.validate().is_err());
        p.top_k = Some(1);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn canonical_string_distinguishes_params() {
        let a = DecodeParams::with_temperature(0.15);
        let mut b = a.clone();
        b.seed = Some(7);
        assert_ne!(a.canonical_string(), b.canonical_string());
        assert_eq!(a.canonical_string(), "temp=0.15;seed=-;top_k=-;beams=-");
    }

    #[test]
    fn model_info_requires_positive_parameters() {
        assert!(ModelInfo::new("m", 0.0).is_err());
        assert!(ModelInfo::new("m", 5.0e8).is_ok());
    }
}
