//! Prompt templating and the generation contract: a chat-style HTTP client
//! for remote backends and a deterministic extractive mock for offline runs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::tokenize;

pub const LLM_URL_ENV: &str = "KGRAG_LLM_URL";
pub const LLM_TOKEN_ENV: &str = "KGRAG_LLM_TOKEN";
pub const LLM_MODEL_ENV: &str = "KGRAG_LLM_MODEL";

/// The default prompt shape used by the pipeline.
pub const DEFAULT_TEMPLATE: &str =
    "Retrieve the answer from the knowledge graph <context> and generate a concise response to the <query>";

/// Fallback answer when the context is empty.
pub const NO_ANSWER: &str = "I don't know.";

const CONTEXT_SLOT: &str = "<context>";
const QUERY_SLOT: &str = "<query>";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("prompt template must contain {placeholder} exactly once, found {count} occurrences")]
    MissingPlaceholder {
        placeholder: &'static str,
        count: usize,
    },
    #[error("transport error talking to LLM endpoint: {0}")]
    Transport(String),
    #[error("LLM protocol error: {0}")]
    Protocol(String),
    #[error("LLM backend returned {status}: {body}")]
    Backend { status: u16, body: String },
}

/// Generation knobs passed through to the backend. Temperature 0 requests
/// greedy decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_tokens: u32,
    pub temperature: f32,
    pub repetition_penalty: f32,
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            max_tokens: 128,
            temperature: 0.0,
            repetition_penalty: 1.1,
            seed: None,
        }
    }
}

/// Template with a `<context>` and a `<query>` placeholder, each appearing
/// exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    template: String,
}

impl PromptTemplate {
    pub fn new(template: impl Into<String>) -> Result<Self, LlmError> {
        let template = template.into();
        for placeholder in [CONTEXT_SLOT, QUERY_SLOT] {
            let count = template.matches(placeholder).count();
            if count != 1 {
                return Err(LlmError::MissingPlaceholder { placeholder: if placeholder == CONTEXT_SLOT { "<context>" } else { "<query>" }, count });
            }
        }
        Ok(PromptTemplate { template })
    }

    pub fn as_str(&self) -> &str {
        &self.template
    }

    /// Substitute both placeholders literally.
    pub fn render(&self, context: &str, query: &str) -> String {
        self.template
            .replacen(CONTEXT_SLOT, context, 1)
            .replacen(QUERY_SLOT, query, 1)
    }

    /// Recover (context, query) from a prompt produced by [`render`]. Used by
    /// the extractive mock; returns None if the prompt does not match the
    /// template's fixed text.
    ///
    /// [`render`]: PromptTemplate::render
    pub fn unrender<'a>(&self, prompt: &'a str) -> Option<(&'a str, &'a str)> {
        let ctx_pos = self.template.find(CONTEXT_SLOT).expect("validated");
        let qry_pos = self.template.find(QUERY_SLOT).expect("validated");
        let context_first = ctx_pos < qry_pos;
        let (first_pos, first_len, second_pos, second_len) = if context_first {
            (ctx_pos, CONTEXT_SLOT.len(), qry_pos, QUERY_SLOT.len())
        } else {
            (qry_pos, QUERY_SLOT.len(), ctx_pos, CONTEXT_SLOT.len())
        };
        let prefix = &self.template[..first_pos];
        let middle = &self.template[first_pos + first_len..second_pos];
        let suffix = &self.template[second_pos + second_len..];

        let rest = prompt.strip_prefix(prefix)?;
        let rest = rest.strip_suffix(suffix)?;
        // The second slot is the query when the context comes first; split on
        // the last occurrence of the fixed middle text so context text that
        // happens to contain it cannot derail the match.
        let split = if context_first {
            rest.rfind(middle)?
        } else {
            rest.find(middle)?
        };
        let (first, second) = (&rest[..split], &rest[split + middle.len()..]);
        if context_first {
            Some((first, second))
        } else {
            Some((second, first))
        }
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate::new(DEFAULT_TEMPLATE).expect("default template is valid")
    }
}

/// Render with explicit template, mirroring the operation contract.
pub fn render_prompt(
    template: &PromptTemplate,
    context: &str,
    query: &str,
) -> String {
    template.render(context, query)
}

pub trait LlmClient: Sync {
    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, LlmError>;
}

/// Deterministic offline generator: returns the context sentence with the
/// highest unigram overlap with the query, earliest sentence on ties.
pub struct ExtractiveMockLlm {
    template: PromptTemplate,
}

impl ExtractiveMockLlm {
    pub fn new(template: PromptTemplate) -> Self {
        ExtractiveMockLlm { template }
    }
}

impl Default for ExtractiveMockLlm {
    fn default() -> Self {
        ExtractiveMockLlm::new(PromptTemplate::default())
    }
}

fn unigram_overlap(a: &[String], b: &[String]) -> usize {
    let mut counts = std::collections::HashMap::new();
    for t in b {
        *counts.entry(t.as_str()).or_insert(0usize) += 1;
    }
    let mut overlap = 0;
    for t in a {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    overlap
}

impl LlmClient for ExtractiveMockLlm {
    fn generate(&self, prompt: &str, _params: &GenerationParams) -> Result<String, LlmError> {
        let Some((context, query)) = self.template.unrender(prompt) else {
            return Ok(NO_ANSWER.to_string());
        };
        if context.trim().is_empty() {
            return Ok(NO_ANSWER.to_string());
        }
        let query_tokens = tokenize(query);
        let mut best: Option<(usize, &str)> = None;
        for sentence in context.split(['.', '!', '?']) {
            let sentence = sentence.trim();
            if sentence.is_empty() {
                continue;
            }
            let overlap = unigram_overlap(&tokenize(sentence), &query_tokens);
            if best.map_or(true, |(top, _)| overlap > top) {
                best = Some((overlap, sentence));
            }
        }
        Ok(best.map_or_else(|| NO_ANSWER.to_string(), |(_, s)| s.to_string()))
    }
}

/// Chat-style HTTP client: one user message, standard completions response.
pub struct HttpLlm {
    endpoint: String,
    token: Option<String>,
    model: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpLlm {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, model: Option<String>) -> Self {
        HttpLlm {
            endpoint: endpoint.into(),
            token,
            model,
            client: reqwest::blocking::Client::new(),
        }
    }

    /// Build from `KGRAG_LLM_URL` / `KGRAG_LLM_TOKEN` / `KGRAG_LLM_MODEL`.
    pub fn from_env() -> Result<Self, LlmError> {
        let url = std::env::var(LLM_URL_ENV)
            .map_err(|_| LlmError::Protocol(format!("{LLM_URL_ENV} is not set")))?;
        Ok(HttpLlm::new(
            url,
            std::env::var(LLM_TOKEN_ENV).ok(),
            std::env::var(LLM_MODEL_ENV).ok(),
        ))
    }

    fn request_once(
        &self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<String, LlmError> {
        let mut body = serde_json::json!({
            "messages": [{ "role": "user", "content": prompt }],
            "max_tokens": params.max_tokens,
            "temperature": params.temperature,
            "repetition_penalty": params.repetition_penalty,
        });
        if let Some(seed) = params.seed {
            body["seed"] = seed.into();
        }
        if let Some(model) = &self.model {
            body["model"] = model.clone().into();
        }

        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req
            .send()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Backend {
                status: status.as_u16(),
                body: text,
            });
        }

        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| LlmError::Protocol(format!("response is not JSON: {e}")))?;
        let content = value
            .pointer("/choices/0/message/content")
            .and_then(serde_json::Value::as_str)
            .ok_or_else(|| LlmError::Protocol("response has no choices".into()))?;
        // Some backends echo the prompt ahead of the completion.
        let answer = content.strip_prefix(prompt).unwrap_or(content);
        Ok(answer.trim().to_string())
    }
}

impl LlmClient for HttpLlm {
    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, LlmError> {
        // The request is idempotent; retry transport failures at most twice.
        let mut last = None;
        for _ in 0..3 {
            match self.request_once(prompt, params) {
                Err(LlmError::Transport(e)) => last = Some(LlmError::Transport(e)),
                other => return other,
            }
        }
        Err(last.expect("loop ran"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_substitutes_literally() {
        let t = PromptTemplate::new("<context> Q: <query>").unwrap();
        assert_eq!(t.render("A.", "B?"), "A. Q: B?");
    }

    #[test]
    fn default_template_renders_exact_concatenation() {
        let t = PromptTemplate::default();
        let rendered = t.render("Alex has event X.", "What is X?");
        assert_eq!(
            rendered,
            "Retrieve the answer from the knowledge graph Alex has event X. and generate a concise response to the What is X?"
        );
        assert!(rendered.contains("Alex has event X."));
        assert!(rendered.contains("What is X?"));
    }

    #[test]
    fn template_requires_both_placeholders_once() {
        assert!(matches!(
            PromptTemplate::new("only <context> here"),
            Err(LlmError::MissingPlaceholder { .. })
        ));
        assert!(matches!(
            PromptTemplate::new("<context> <query> <query>"),
            Err(LlmError::MissingPlaceholder { .. })
        ));
    }

    #[test]
    fn unrender_inverts_render() {
        let t = PromptTemplate::default();
        let prompt = t.render("Some context. More context.", "the question?");
        assert_eq!(
            t.unrender(&prompt),
            Some(("Some context. More context.", "the question?"))
        );
        assert_eq!(t.unrender("unrelated text"), None);
    }

    #[test]
    fn mock_picks_max_overlap_sentence() {
        let t = PromptTemplate::default();
        let mock = ExtractiveMockLlm::new(t.clone());
        let context = "Alex has event Raksha Bandhan on 2024-08-19. Alex has event Team Meeting on 2024-01-15.";
        let query = "What is the event on August 19th, 2024?";
        // Both sentences tie on unigram overlap (event, on, 2024); the
        // earliest sentence wins.
        let prompt = t.render(context, query);
        assert_eq!(
            mock.generate(&prompt, &GenerationParams::default()).unwrap(),
            "Alex has event Raksha Bandhan on 2024-08-19"
        );
    }

    #[test]
    fn mock_empty_context_falls_back() {
        let t = PromptTemplate::default();
        let mock = ExtractiveMockLlm::new(t.clone());
        let prompt = t.render("", "anything?");
        assert_eq!(
            mock.generate(&prompt, &GenerationParams::default()).unwrap(),
            NO_ANSWER
        );
    }

    #[test]
    fn mock_single_sentence_context() {
        let t = PromptTemplate::default();
        let mock = ExtractiveMockLlm::new(t.clone());
        let prompt = t.render("Only one sentence here.", "unrelated query?");
        assert_eq!(
            mock.generate(&prompt, &GenerationParams::default()).unwrap(),
            "Only one sentence here"
        );
    }

    #[test]
    fn mock_answer_is_substring_of_context() {
        let t = PromptTemplate::default();
        let mock = ExtractiveMockLlm::new(t.clone());
        let context = "Alpha beta gamma. Delta epsilon zeta! Eta theta?";
        let prompt = t.render(context, "delta epsilon?");
        let answer = mock.generate(&prompt, &GenerationParams::default()).unwrap();
        assert!(context.contains(&answer));
        assert_eq!(answer, "Delta epsilon zeta");
    }
}
