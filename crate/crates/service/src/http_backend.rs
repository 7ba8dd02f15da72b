//! Chat backend for OpenAI-compatible `/chat/completions` endpoints.
//!
//! Uses a blocking client. Inside an async runtime, call it from
//! `spawn_blocking`.

use std::sync::OnceLock;
use std::time::Duration;

use base64::Engine as _;
use partgrasp::perception::{BackendError, ChatBackend, ChatRequest, Role};
use serde_json::{json, Value};

use crate::config::HttpSettings;

pub struct HttpBackend {
    settings: HttpSettings,
    api_key: Option<String>,
    // built on first use: the blocking client may not be created or dropped
    // on an async worker thread
    client: OnceLock<reqwest::blocking::Client>,
}

impl HttpBackend {
    pub fn new(settings: HttpSettings, api_key: Option<String>) -> Result<Self, BackendError> {
        if reqwest::Url::parse(&settings.base_url).is_err() {
            return Err(BackendError::Unavailable(format!("invalid base_url `{}`", settings.base_url)));
        }
        Ok(Self {
            settings,
            api_key,
            client: OnceLock::new(),
        })
    }

    fn client(&self) -> Result<&reqwest::blocking::Client, BackendError> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let c = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(self.settings.timeout_secs))
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(self.client.get_or_init(|| c))
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.settings.base_url.trim_end_matches('/'))
    }
}

/// Request body. The image, when present, rides on the last user message.
pub fn request_body(model: &str, request: &ChatRequest) -> Value {
    let last_user = request.messages.iter().rposition(|m| m.role == Role::User);
    let messages: Vec<Value> = request
        .messages
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let role = serde_json::to_value(m.role).expect("role serializes");
            match (&request.image_png, Some(i) == last_user) {
                (Some(png), true) => {
                    let url = format!(
                        "data:image/png;base64,{}",
                        base64::engine::general_purpose::STANDARD.encode(png)
                    );
                    json!({"role": role, "content": [
                        {"type": "text", "text": m.content},
                        {"type": "image_url", "image_url": {"url": url}}
                    ]})
                }
                _ => json!({"role": role, "content": m.content}),
            }
        })
        .collect();
    json!({"model": model, "temperature": request.temperature, "messages": messages})
}

fn reply_text(body: &Value) -> Option<&str> {
    body.pointer("/choices/0/message/content")?.as_str()
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let mut req = self
            .client()?
            .post(self.endpoint())
            .json(&request_body(&self.settings.model, request));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| BackendError::Unavailable(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Unavailable(format!("HTTP {status}: {text}")));
        }
        let body: Value =
            serde_json::from_str(&text).map_err(|e| BackendError::Unavailable(format!("bad response body: {e}")))?;
        reply_text(&body)
            .map(str::to_owned)
            .ok_or_else(|| BackendError::Unavailable("response has no choices[0].message.content".into()))
    }

    fn supports_images(&self) -> bool {
        self.settings.vision
    }
}

impl Drop for HttpBackend {
    fn drop(&mut self) {
        if let Some(client) = self.client.take() {
            if tokio::runtime::Handle::try_current().is_ok() {
                std::thread::spawn(move || drop(client));
            }
        }
    }
}
