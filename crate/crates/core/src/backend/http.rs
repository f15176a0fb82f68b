//! OpenAI-compatible chat-completions client.
//!
//! POSTs `{base_url}/chat/completions` with the prompt rendered from the
//! configured template, maps decode parameters onto the API's sampling
//! fields, and scrubs the assistant message of the wrappers chat models
//! like to add (code fences, "Translation:" labels, echoed prompts).

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{BackendError, Error, Result};

use super::{TranslationBackend, TranslationRequest};

/// Prompt prefix sent for every translation, with the display names and the
/// source text substituted in.
pub const DEFAULT_PROMPT_TEMPLATE: &str =
    "Translate the following sentence from language {source} to language {target}: {text}";

const DEFAULT_API_KEY_ENV: &str = "CYCLEMT_API_KEY";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Endpoint root, e.g. "http://localhost:8000/v1".
    pub base_url: String,
    /// Environment variable holding the bearer token. No header is sent
    /// when the variable is unset (common for local servers).
    pub api_key_env: String,
    pub timeout_s: u64,
    /// Additional attempts after the first, on transport errors, 429, and 5xx.
    pub retries: u32,
    /// Override of the prompt template; `{source}`, `{target}`, `{text}`.
    pub prompt_template: Option<String>,
    /// Optional system message for chat-tuned models.
    pub system_prompt: Option<String>,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_s: 60,
            retries: 2,
            prompt_template: None,
            system_prompt: None,
        }
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self> {
        if config.base_url.is_empty() {
            return Err(Error::Config("backend.base_url must be non-empty".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .map_err(|e| Error::Config(format!("failed to build HTTP client: {e}")))?;
        Ok(Self { config, client })
    }

    fn render_prompt(&self, request: &TranslationRequest) -> String {
        self.config
            .prompt_template
            .as_deref()
            .unwrap_or(DEFAULT_PROMPT_TEMPLATE)
            .replace("{source}", request.source.display_name())
            .replace("{target}", request.target.display_name())
            .replace("{text}", &request.text)
    }

    fn build_body(&self, request: &TranslationRequest, prompt: &str) -> serde_json::Value {
        let mut messages = Vec::new();
        if let Some(system) = &self.config.system_prompt {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": prompt}));
        let mut body = json!({
            "model": request.model,
            "messages": messages,
            "temperature": request.params.temperature,
        });
        if let Some(seed) = request.params.seed {
            body["seed"] = json!(seed);
        }
        if let Some(top_k) = request.params.top_k {
            body["top_k"] = json!(top_k);
        }
        body
    }

    fn send_once(
        &self,
        url: &str,
        body: &serde_json::Value,
    ) -> std::result::Result<String, (Option<u16>, String, bool)> {
        let mut builder = self.client.post(url).json(body);
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            if !key.is_empty() {
                builder = builder.bearer_auth(key);
            }
        }
        let response = builder
            .send()
            .map_err(|e| (None, e.to_string(), true))?;
        let status = response.status();
        if !status.is_success() {
            let retryable = status.as_u16() == 429 || status.is_server_error();
            let text = response.text().unwrap_or_default();
            let snippet: String = text.chars().take(200).collect();
            return Err((Some(status.as_u16()), snippet, retryable));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| (Some(status.as_u16()), format!("malformed response body: {e}"), false))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        Ok(content)
    }
}

impl TranslationBackend for HttpBackend {
    fn translate(&self, request: &TranslationRequest) -> std::result::Result<String, BackendError> {
        if request.text.is_empty() {
            return Err(BackendError::InvalidRequest("text must be non-empty".into()));
        }
        request
            .params
            .validate()
            .map_err(|e| BackendError::InvalidRequest(e.to_string()))?;

        let prompt = self.render_prompt(request);
        let body = self.build_body(request, &prompt);
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));

        let mut attempts = 0u32;
        let raw = loop {
            attempts += 1;
            match self.send_once(&url, &body) {
                Ok(content) => break content,
                Err((status, message, retryable)) => {
                    if retryable && attempts <= self.config.retries {
                        log::debug!(
                            "attempt {attempts} against {url} failed ({message}); retrying"
                        );
                        continue;
                    }
                    return Err(BackendError::Transport {
                        status,
                        attempts,
                        message,
                    });
                }
            }
        };

        let cleaned = clean_response(&raw, &prompt);
        if cleaned.is_empty() {
            return Err(BackendError::EmptyResponse);
        }
        Ok(cleaned)
    }
}

/// Response hygiene, applied in order: trim, unwrap a surrounding code
/// fence, drop an echoed prompt prefix, drop a leading "Translation:"
/// label, trim again. Each rule exists because some chat model emits it.
pub fn clean_response(raw: &str, prompt: &str) -> String {
    let mut text = raw.trim();

    if let Some(unfenced) = strip_code_fence(text) {
        text = unfenced;
    }

    if let Some(rest) = text.strip_prefix(prompt) {
        text = rest.trim_start();
    }

    for label in ["Translation:", "translation:", "TRANSLATION:"] {
        if let Some(rest) = text.strip_prefix(label) {
            text = rest.trim_start();
            break;
        }
    }

    text.trim().to_string()
}

fn strip_code_fence(text: &str) -> Option<&str> {
    let rest = text.strip_prefix("```")?;
    let body_start = rest.find('\n')?;
    let body = &rest[body_start + 1..];
    let body = body.strip_suffix("```")?;
    Some(body.trim())
}

#[cfg(test)]
mod tests {
    use super::*;

    const PROMPT: &str =
        "Translate the following sentence from language English to language French: Hello";

    #[test]
    fn plain_responses_are_trimmed_only() {
        assert_eq!(clean_response("  Bonjour \n", PROMPT), "Bonjour");
    }

    #[test]
    fn code_fences_are_unwrapped() {
        assert_eq!(clean_response("```\nBonjour\n```", PROMPT), "Bonjour");
        assert_eq!(clean_response("```text\nBonjour\n```", PROMPT), "Bonjour");
    }

    #[test]
    fn translation_labels_are_stripped() {
        assert_eq!(clean_response("Translation: Bonjour", PROMPT), "Bonjour");
        assert_eq!(clean_response("translation:\nBonjour", PROMPT), "Bonjour");
    }

    #[test]
    fn echoed_prompt_prefix_is_stripped() {
        let raw = format!("{PROMPT}\nBonjour");
        assert_eq!(clean_response(&raw, PROMPT), "Bonjour");
    }

    #[test]
    fn rules_compose() {
        let raw = format!("```\n{PROMPT}\nTranslation: Bonjour\n```");
        assert_eq!(clean_response(&raw, PROMPT), "Bonjour");
    }

    #[test]
    fn fence_without_closing_is_left_alone() {
        assert_eq!(clean_response("```\nBonjour", PROMPT), "```\nBonjour");
    }
}
