//! OpenAI-compatible chat-completions client over blocking HTTP.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

use super::{with_retries, AgentEndpoint, ChatRequest, ChatResponse, RetryPolicy};

/// Endpoint configuration. The credential itself is never stored: only the
/// name of the environment variable holding it, read at request time, so
/// serializing a config into logs or manifests cannot leak the secret.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
}

impl EndpointConfig {
    pub fn new(base_url: &str, model: &str) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key_env: None,
            timeout_secs: 60,
            retry: RetryPolicy::default(),
        }
    }
}

/// A `POST {base_url}/v1/chat/completions` client.
pub struct HttpEndpoint {
    config: EndpointConfig,
    label: String,
    client: reqwest::blocking::Client,
}

impl HttpEndpoint {
    pub fn new(config: EndpointConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Endpoint(format!("client build failed: {e}")))?;
        let label = format!("{}@{}", config.model, config.base_url);
        Ok(Self { config, label, client })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn attempt(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let mut body = json!({
            "model": self.config.model,
            "messages": request.messages,
            "temperature": request.temperature,
        });
        if request.json_mode {
            body["response_format"] = json!({ "type": "json_object" });
        }
        if let Some(max_tokens) = request.max_tokens {
            body["max_tokens"] = json!(max_tokens);
        }
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }

        let url = format!("{}/v1/chat/completions", self.config.base_url);
        let mut builder = self.client.post(&url).json(&body);
        if let Some(var) = &self.config.api_key_env {
            let key = std::env::var(var)
                .map_err(|_| Error::Config(format!("credential variable {var} is not set")))?;
            builder = builder.bearer_auth(key);
        }

        let response = builder.send().map_err(|e| {
            if e.is_timeout() {
                Error::EndpointTimeout(format!("{url}: {e}"))
            } else {
                Error::Endpoint(format!("transient: {url}: {e}"))
            }
        })?;

        let status = response.status();
        if !status.is_success() {
            let retryable = status.as_u16() == 408 || status.as_u16() == 429 || status.is_server_error();
            let text = response.text().unwrap_or_default();
            let msg = format!("{url} returned status {status}: {}", text.chars().take(200).collect::<String>());
            return Err(if retryable {
                Error::Endpoint(format!("transient: {msg}"))
            } else {
                Error::Endpoint(msg)
            });
        }

        let value: Value = response
            .json()
            .map_err(|e| Error::Endpoint(format!("bad response body from {url}: {e}")))?;
        let content = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| Error::Endpoint(format!("no message content in response from {url}")))?
            .to_string();
        let usage_tokens = value["usage"]["total_tokens"].as_u64();
        Ok(ChatResponse { content, usage_tokens })
    }
}

impl AgentEndpoint for HttpEndpoint {
    fn name(&self) -> &str {
        &self.label
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let mut attempts = Vec::new();
        with_retries(&self.config.retry, |_| self.attempt(request), &mut attempts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    /// Minimal one-shot HTTP server returning canned bodies in order.
    fn serve_canned(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut seen_bodies = Vec::new();
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = [0u8; 65536];
                let n = stream.read(&mut buf).unwrap();
                let request = String::from_utf8_lossy(&buf[..n]).to_string();
                seen_bodies.push(request);
                let reason = if status == 200 { "OK" } else { "ERR" };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(response.as_bytes()).unwrap();
            }
            seen_bodies
        });
        (format!("http://{addr}"), handle)
    }

    fn ok_body(content: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}],
            "usage": {"total_tokens": 17}
        })
        .to_string()
    }

    fn request() -> ChatRequest {
        ChatRequest {
            messages: vec![super::super::Message::user("hello")],
            json_mode: true,
            temperature: 0.0,
            max_tokens: None,
            seed: Some(7),
        }
    }

    #[test]
    fn happy_path_parses_content_and_usage() {
        let (base, server) = serve_canned(vec![(200, ok_body("{\"calls\":[],\"reply\":\"hi\"}"))]);
        let endpoint = HttpEndpoint::new(EndpointConfig::new(&base, "test-model")).unwrap();
        let response = endpoint.chat(&request()).unwrap();
        assert_eq!(response.content, "{\"calls\":[],\"reply\":\"hi\"}");
        assert_eq!(response.usage_tokens, Some(17));
        let seen = server.join().unwrap();
        assert!(seen[0].contains("POST /v1/chat/completions"));
        assert!(seen[0].contains("\"response_format\":{\"type\":\"json_object\"}"));
        assert!(seen[0].contains("\"seed\":7"));
    }

    #[test]
    fn retries_transient_statuses_then_succeeds() {
        let (base, server) = serve_canned(vec![
            (503, "{}".into()),
            (429, "{}".into()),
            (200, ok_body("done")),
        ]);
        let mut config = EndpointConfig::new(&base, "m");
        config.retry = RetryPolicy { max_attempts: 3, base_delay_ms: 1, max_delay_ms: 2 };
        let endpoint = HttpEndpoint::new(config).unwrap();
        let response = endpoint.chat(&request()).unwrap();
        assert_eq!(response.content, "done");
        assert_eq!(server.join().unwrap().len(), 3);
    }

    #[test]
    fn non_retryable_status_fails_fast() {
        let (base, server) = serve_canned(vec![(401, "{}".into())]);
        let mut config = EndpointConfig::new(&base, "m");
        config.retry = RetryPolicy { max_attempts: 3, base_delay_ms: 1, max_delay_ms: 2 };
        let endpoint = HttpEndpoint::new(config).unwrap();
        let err = endpoint.chat(&request()).unwrap_err();
        assert!(matches!(err, Error::Endpoint(ref m) if m.contains("401")), "{err}");
        server.join().unwrap();
    }

    #[test]
    fn config_serialization_never_contains_the_credential() {
        std::env::set_var("EOBENCH_TEST_SECRET", "super-secret-value");
        let mut config = EndpointConfig::new("http://localhost:1", "m");
        config.api_key_env = Some("EOBENCH_TEST_SECRET".into());
        let serialized = serde_json::to_string(&config).unwrap();
        assert!(!serialized.contains("super-secret-value"));
        assert!(serialized.contains("EOBENCH_TEST_SECRET"));
    }
}
