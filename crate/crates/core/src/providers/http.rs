//! JSON-over-HTTP adapters, one endpoint per provider kind:
//!
//! - `POST /v1/complete {prompt, max_new_tokens, vision_ref?}` -> `{text}`
//! - `POST /v1/embed {texts}` -> `{embeddings}`
//! - `POST /v1/narrate {clip_ref, k}` -> `{narrations: [{text, span?}]}`
//! - `POST /v1/encode {clip_refs}` -> `{token_count, payload}`
//!
//! Transport errors and 5xx/429 responses are retried with exponential
//! backoff; after the last attempt the error is returned, never swallowed.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    Embedder, LanguageModel, Narrator, ProviderDescriptor, ProviderError, ProviderKind,
    VisionEncoder, DEFAULT_CONTEXT_LIMIT,
};
use crate::embedding::EmbeddingVector;
use crate::types::{Narration, NarrationSource, Span, VideoSegment, VisionTokenBlock};

/// Environment variable holding the bearer token sent to providers.
pub const TOKEN_ENV: &str = "EGOASSIST_PROVIDER_TOKEN";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay_ms: 200,
            max_delay_ms: 5_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1` (1-based `attempt`).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64 << (attempt.saturating_sub(1)).min(20);
        Duration::from_millis(
            self.base_delay_ms
                .saturating_mul(factor)
                .min(self.max_delay_ms),
        )
    }
}

#[derive(Debug, Clone)]
pub struct HttpEndpoint {
    name: String,
    base_url: String,
    token: Option<String>,
    retry: RetryPolicy,
    client: reqwest::blocking::Client,
}

impl HttpEndpoint {
    pub fn new(name: &str, base_url: &str) -> Self {
        Self {
            name: name.to_string(),
            base_url: base_url.trim_end_matches('/').to_string(),
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            retry: RetryPolicy::default(),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("http client"),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn descriptor(&self, kind: ProviderKind) -> ProviderDescriptor {
        ProviderDescriptor {
            kind,
            name: self.name.clone(),
            context_limit: (kind == ProviderKind::Llm).then_some(DEFAULT_CONTEXT_LIMIT),
            deterministic: false,
            endpoint: Some(self.base_url.clone()),
        }
    }

    pub fn post<T: DeserializeOwned>(&self, path: &str, body: &Value) -> Result<T, ProviderError> {
        let url = format!("{}{}", self.base_url, path);
        let mut last = String::new();
        for attempt in 1..=self.retry.max_attempts.max(1) {
            let mut req = self.client.post(&url).json(body);
            if let Some(t) = &self.token {
                req = req.bearer_auth(t);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp.json::<T>().map_err(|e| ProviderError::Response {
                            provider: self.name.clone(),
                            message: e.to_string(),
                        });
                    }
                    let text = resp.text().unwrap_or_default();
                    if !(status.is_server_error() || status.as_u16() == 429) {
                        return Err(ProviderError::Response {
                            provider: self.name.clone(),
                            message: format!("{status}: {text}"),
                        });
                    }
                    last = format!("{status}: {text}");
                }
                Err(e) => last = e.to_string(),
            }
            tracing::warn!(provider = %self.name, attempt, error = %last, "provider call failed");
            if attempt < self.retry.max_attempts {
                std::thread::sleep(self.retry.delay(attempt));
            }
        }
        Err(ProviderError::Transport {
            provider: self.name.clone(),
            attempts: self.retry.max_attempts.max(1),
            message: last,
        })
    }
}

pub struct HttpLlm {
    endpoint: HttpEndpoint,
    context_limit: usize,
}

impl HttpLlm {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        Self {
            endpoint,
            context_limit: DEFAULT_CONTEXT_LIMIT,
        }
    }

    pub fn with_context_limit(mut self, limit: usize) -> Self {
        self.context_limit = limit;
        self
    }
}

#[derive(Deserialize)]
struct CompleteResponse {
    text: String,
}

impl LanguageModel for HttpLlm {
    fn descriptor(&self) -> ProviderDescriptor {
        ProviderDescriptor {
            context_limit: Some(self.context_limit),
            ..self.endpoint.descriptor(ProviderKind::Llm)
        }
    }

    fn complete(
        &self,
        prompt: &str,
        max_new_tokens: usize,
        vision: Option<&VisionTokenBlock>,
    ) -> Result<String, ProviderError> {
        if max_new_tokens == 0 {
            return Ok(String::new());
        }
        let mut body = json!({"prompt": prompt, "max_new_tokens": max_new_tokens});
        if let Some(v) = vision {
            body["vision_ref"] = json!(v.payload);
        }
        Ok(self
            .endpoint
            .post::<CompleteResponse>("/v1/complete", &body)?
            .text)
    }
}

pub struct HttpEmbedder {
    endpoint: HttpEndpoint,
}

impl HttpEmbedder {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        Self { endpoint }
    }
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

impl Embedder for HttpEmbedder {
    fn descriptor(&self) -> ProviderDescriptor {
        self.endpoint.descriptor(ProviderKind::Embedder)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        if texts.is_empty() {
            return Err(ProviderError::Argument("embed called with no texts".into()));
        }
        let resp: EmbedResponse = self.endpoint.post("/v1/embed", &json!({"texts": texts}))?;
        let bad = |message: String| ProviderError::Response {
            provider: self.endpoint.name.clone(),
            message,
        };
        if resp.embeddings.len() != texts.len() {
            return Err(bad(format!(
                "{} embeddings for {} texts",
                resp.embeddings.len(),
                texts.len()
            )));
        }
        resp.embeddings
            .into_iter()
            .map(|v| {
                EmbeddingVector::new(v).ok_or_else(|| bad("empty or non-finite embedding".into()))
            })
            .collect()
    }
}

pub struct HttpNarrator {
    endpoint: HttpEndpoint,
}

impl HttpNarrator {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        Self { endpoint }
    }
}

#[derive(Deserialize)]
struct NarrateItem {
    text: String,
    #[serde(default)]
    span: Option<Span>,
}

#[derive(Deserialize)]
struct NarrateResponse {
    narrations: Vec<NarrateItem>,
}

impl Narrator for HttpNarrator {
    fn descriptor(&self) -> ProviderDescriptor {
        self.endpoint.descriptor(ProviderKind::Narrator)
    }

    fn narrate(&self, clip: &VideoSegment, k: usize) -> Result<Vec<Narration>, ProviderError> {
        if k == 0 {
            return Err(ProviderError::Argument("k must be at least 1".into()));
        }
        let resp: NarrateResponse = self
            .endpoint
            .post("/v1/narrate", &json!({"clip_ref": clip, "k": k}))?;
        resp.narrations
            .into_iter()
            .map(|n| {
                Narration::new(
                    n.text,
                    n.span.unwrap_or(clip.span),
                    NarrationSource::Narrator,
                )
                .map_err(|e| ProviderError::Response {
                    provider: self.endpoint.name.clone(),
                    message: e.to_string(),
                })
            })
            .collect()
    }
}

pub struct HttpVisionEncoder {
    endpoint: HttpEndpoint,
}

impl HttpVisionEncoder {
    pub fn new(endpoint: HttpEndpoint) -> Self {
        Self { endpoint }
    }
}

impl VisionEncoder for HttpVisionEncoder {
    fn descriptor(&self) -> ProviderDescriptor {
        self.endpoint.descriptor(ProviderKind::VisionEncoder)
    }

    fn encode(&self, segments: &[VideoSegment]) -> Result<VisionTokenBlock, ProviderError> {
        if segments.is_empty() {
            return Err(ProviderError::Argument("no segments to encode".into()));
        }
        self.endpoint
            .post::<VisionTokenBlock>("/v1/encode", &json!({"clip_refs": segments}))
            .map_err(|e| match e {
                ProviderError::Transport { .. } => {
                    ProviderError::Unavailable(format!("{e}; fall back to the Socratic pipeline"))
                }
                other => other,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Serves canned responses: the i-th request gets `responses[i]` (the
    /// last one repeats). Returns the base URL and a request counter.
    fn serve(responses: Vec<(u16, &'static str)>) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut body = vec![0; len];
                let _ = reader.read_exact(&mut body);
                let i = counter.fetch_add(1, Ordering::SeqCst);
                let (status, text) = responses[i.min(responses.len() - 1)];
                let reply = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{text}",
                    text.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        (url, hits)
    }

    fn fast() -> RetryPolicy {
        RetryPolicy {
            max_attempts: 3,
            base_delay_ms: 1,
            max_delay_ms: 4,
        }
    }

    #[test]
    fn retries_then_succeeds() {
        let (url, hits) = serve(vec![
            (503, "{}"),
            (503, "{}"),
            (200, r#"{"text":"1. cut tomato"}"#),
        ]);
        let llm = HttpLlm::new(HttpEndpoint::new("remote", &url).with_retry(fast()));
        assert_eq!(llm.complete("p", 16, None).unwrap(), "1. cut tomato");
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn gives_up_with_attempt_count() {
        let (url, hits) = serve(vec![(503, "{}")]);
        let llm = HttpLlm::new(HttpEndpoint::new("remote", &url).with_retry(fast()));
        match llm.complete("p", 16, None) {
            Err(ProviderError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (url, hits) = serve(vec![(400, r#"{"error":"bad"}"#)]);
        let emb = HttpEmbedder::new(HttpEndpoint::new("remote", &url).with_retry(fast()));
        assert!(matches!(
            emb.embed(&["a".to_string()]),
            Err(ProviderError::Response { .. })
        ));
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn embed_and_encode_parse_responses() {
        let (url, _) = serve(vec![(200, r#"{"embeddings":[[1.0,0.0],[0.0,1.0]]}"#)]);
        let emb = HttpEmbedder::new(HttpEndpoint::new("remote", &url).with_retry(fast()));
        let v = emb.embed(&["a".into(), "b".into()]).unwrap();
        assert_eq!(v[0].cosine(&v[1]), 0.0);

        let (url, _) = serve(vec![(200, r#"{"token_count":256,"payload":"blk"}"#)]);
        let enc = HttpVisionEncoder::new(HttpEndpoint::new("remote", &url).with_retry(fast()));
        let seg = VideoSegment::new(Span::new(0.0, 2.0).unwrap(), vec![]).unwrap();
        assert_eq!(enc.encode(&[seg]).unwrap().token_count, 256);
    }

    #[test]
    fn unreachable_encoder_suggests_fallback() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        drop(listener);
        let enc = HttpVisionEncoder::new(HttpEndpoint::new("remote", &url).with_retry(fast()));
        let seg = VideoSegment::new(Span::new(0.0, 2.0).unwrap(), vec![]).unwrap();
        let err = enc.encode(&[seg]).unwrap_err();
        assert!(matches!(err, ProviderError::Unavailable(_)));
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_attempts: 5,
            base_delay_ms: 100,
            max_delay_ms: 300,
        };
        assert_eq!(p.delay(1), Duration::from_millis(100));
        assert_eq!(p.delay(2), Duration::from_millis(200));
        assert_eq!(p.delay(3), Duration::from_millis(300));
    }
}
