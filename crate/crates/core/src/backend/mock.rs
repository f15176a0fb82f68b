//! Deterministic noisy-channel backend for offline testing.
//!
//! Translation is simulated by a reversible tagging scheme over whitespace
//! tokens: a token already tagged with the source language code is untagged
//! (backward direction), anything else is lowercased and tagged with the
//! target code (forward direction). A zero-noise channel therefore cycles
//! any text back to its whitespace-tokenized original.
//!
//! Noise replaces individual tokens with junk. Each token's fate is drawn
//! from an RNG keyed on (channel base seed, request seed, token index), so
//! runs are reproducible to the byte, and the corruption probability is
//! `min(1, rho + temperature * kappa)`: hotter sampling degrades fidelity.
//!
//! The tagging is honest only for text whose tokens don't already look like
//! `code:...` for a language code in play; that's fine for a test channel.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BackendError, Error, Result};

use super::{TranslationBackend, TranslationRequest};

/// Noisy-channel parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Baseline per-token corruption probability.
    pub rho: f64,
    /// Temperature-to-noise coupling: effective rate is rho + temp * kappa.
    pub kappa: f64,
    /// Channel seed, mixed into every per-token draw.
    pub base_seed: u64,
    /// Per-language-pair overrides of `rho`, keyed "src-tgt". Lookup falls
    /// back to the reversed key, so a single entry makes a symmetric
    /// low-noise (or high-noise) channel between two languages.
    #[serde(default)]
    pub per_pair_rho: BTreeMap<String, f64>,
}

impl NoiseConfig {
    pub fn noiseless(base_seed: u64) -> Self {
        Self {
            rho: 0.0,
            kappa: 0.0,
            base_seed,
            per_pair_rho: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (pair, rho) in std::iter::once((&"default".to_string(), &self.rho))
            .chain(self.per_pair_rho.iter())
        {
            if !(0.0..=1.0).contains(rho) {
                return Err(Error::Config(format!(
                    "corruption rate for '{pair}' must be in [0, 1], got {rho}"
                )));
            }
        }
        if self.kappa.is_nan() || self.kappa < 0.0 {
            return Err(Error::Config(format!(
                "kappa must be >= 0, got {}",
                self.kappa
            )));
        }
        Ok(())
    }

    fn pair_rho(&self, source: &str, target: &str) -> f64 {
        self.per_pair_rho
            .get(&format!("{source}-{target}"))
            .or_else(|| self.per_pair_rho.get(&format!("{target}-{source}")))
            .copied()
            .unwrap_or(self.rho)
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            rho: 0.0,
            kappa: 0.1,
            base_seed: 0,
            per_pair_rho: BTreeMap::new(),
        }
    }
}

/// The deterministic mock channel.
pub struct MockBackend {
    config: NoiseConfig,
}

impl MockBackend {
    pub fn new(config: NoiseConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &NoiseConfig {
        &self.config
    }

    fn token_rng(&self, request_seed: u64, index: u64) -> ChaCha8Rng {
        // Fixed layout: the ChaCha key is the raw little-endian triple plus a
        // constant salt, so identical inputs give identical draws everywhere.
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&self.config.base_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&request_seed.to_le_bytes());
        seed[16..24].copy_from_slice(&index.to_le_bytes());
        seed[24..32].copy_from_slice(&0x6e6f_6973_795f_6368u64.to_le_bytes());
        ChaCha8Rng::from_seed(seed)
    }
}

impl TranslationBackend for MockBackend {
    fn translate(&self, request: &TranslationRequest) -> std::result::Result<String, BackendError> {
        if request.text.is_empty() {
            return Err(BackendError::InvalidRequest("text must be non-empty".into()));
        }
        request
            .params
            .validate()
            .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;

        let source = request.source.code();
        let target = request.target.code();
        let rho = self.config.pair_rho(source, target);
        let effective = (rho + request.params.temperature * self.config.kappa).min(1.0);
        let request_seed = request.params.seed.unwrap_or(0);
        let source_tag = format!("{source}:");

        let out: Vec<String> = request
            .text
            .split_whitespace()
            .enumerate()
            .map(|(index, token)| {
                let mut rng = self.token_rng(request_seed, index as u64);
                if rng.gen::<f64>() < effective {
                    format!("zq{:08x}", rng.gen::<u32>())
                } else {
                    let token = token.to_lowercase();
                    match token.strip_prefix(&source_tag) {
                        Some(body) if !body.is_empty() => body.to_string(),
                        _ => format!("{target}:{token}"),
                    }
                }
            })
            .collect();

        Ok(out.join(" "))
    }
}
