//! Adapter for OpenAI-compatible `chat/completions` endpoints.

use serde_json::{json, Value};

use crate::backend::{Backend, CompletionRequest};
use crate::error::{AgentError, TransportError};

#[derive(Clone, Debug)]
pub struct ChatCompletionsBackend {
    id: String,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl ChatCompletionsBackend {
    /// `base_url` is the API root, e.g. `https://api.openai.com/v1`.
    pub fn new(
        id: impl Into<String>,
        base_url: &str,
        model: impl Into<String>,
        api_key: Option<String>,
    ) -> Self {
        ChatCompletionsBackend {
            id: id.into(),
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            model: model.into(),
            api_key,
        }
    }

    /// Reads the API key from the environment variable `key_var`.
    pub fn from_env(
        id: impl Into<String>,
        base_url: &str,
        model: impl Into<String>,
        key_var: &str,
    ) -> Result<Self, AgentError> {
        let key = std::env::var(key_var)
            .map_err(|_| AgentError::BackendConfig(format!("environment variable {key_var} is not set")))?;
        Ok(ChatCompletionsBackend::new(id, base_url, model, Some(key)))
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Request body: the system and user prompts plus any caller parameters,
    /// which override nothing but are otherwise passed as given.
    pub fn request_body(&self, request: &CompletionRequest) -> Value {
        let mut body = request.params.clone();
        body.insert("model".into(), Value::String(self.model.clone()));
        body.insert(
            "messages".into(),
            json!([
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.prompt},
            ]),
        );
        Value::Object(body)
    }
}

/// Extracts `choices[0].message.content` from a response body.
pub fn parse_chat_response(body: &str) -> Result<String, TransportError> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| TransportError::Malformed(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| TransportError::Malformed("missing choices[0].message.content".into()))
}

impl Backend for ChatCompletionsBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn send(&self, request: &CompletionRequest) -> Result<String, TransportError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(request.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut call = agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let body = self.request_body(request).to_string();
        let mut response = call.send(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            other => TransportError::Io(other.to_string()),
        })?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Io(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status { status, body: text });
        }
        parse_chat_response(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::time::Duration;

    /// Serves one canned HTTP response and returns the raw request it saw.
    fn serve_once(status: &str, body: &str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let response = format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut head = String::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            reader.get_mut().write_all(response.as_bytes()).unwrap();
            head + &String::from_utf8(body).unwrap()
        });
        (url, handle)
    }

    #[test]
    fn round_trip_against_local_server() {
        let (url, server) = serve_once(
            "200 OK",
            r#"{"choices":[{"message":{"role":"assistant","content":"<你好> I DECIDE TO CHOOSE [A]"}}]}"#,
        );
        let backend = ChatCompletionsBackend::new("local", &url, "test-model", Some("sk-test".into()));
        let req = CompletionRequest::new("sys", "user prompt").with_timeout(Duration::from_secs(5));
        let text = backend.send(&req).unwrap();
        assert_eq!(text, "<你好> I DECIDE TO CHOOSE [A]");
        let seen = server.join().unwrap();
        assert!(seen.starts_with("POST /v1/chat/completions"));
        assert!(seen.contains("Bearer sk-test"));
        assert!(seen.contains("\"model\":\"test-model\""));
        assert!(!seen.contains("temperature"));
    }

    #[test]
    fn http_error_status_is_reported() {
        let (url, server) = serve_once("503 Service Unavailable", r#"{"error":"busy"}"#);
        let backend = ChatCompletionsBackend::new("local", &url, "m", None);
        let err = backend
            .send(&CompletionRequest::new("s", "p").with_timeout(Duration::from_secs(5)))
            .unwrap_err();
        assert!(matches!(err, TransportError::Status { status: 503, .. }));
        server.join().unwrap();
    }

    #[test]
    fn malformed_bodies() {
        assert!(matches!(
            parse_chat_response("{}"),
            Err(TransportError::Malformed(_))
        ));
        assert!(parse_chat_response("not json").is_err());
    }

    #[test]
    fn params_pass_through() {
        let b = ChatCompletionsBackend::new("x", "http://h/v1/", "m", None);
        assert_eq!(b.endpoint(), "http://h/v1/chat/completions");
        let mut params = serde_json::Map::new();
        params.insert("top_p".into(), json!(0.5));
        let body = b.request_body(&CompletionRequest::new("s", "p").with_params(params));
        assert_eq!(body["top_p"], json!(0.5));
        assert_eq!(body["messages"][1]["content"], json!("p"));
    }
}
