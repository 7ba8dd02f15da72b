use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::IoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

/// One completion request.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    /// PNG of the scene, attached only for backends that accept images.
    pub image_png: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("no scripted rule matches the dialogue: {0:?}")]
    NoMatch(String),
}

/// A chat-completion provider. Calls block until the reply is available.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;

    fn supports_images(&self) -> bool {
        false
    }
}

/// Prefix of the user message sent back after a reply fails validation.
pub const RETRY_PREFIX: &str = "Your previous reply was rejected by the schema validator.";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RuleFile {
    #[serde(rename = "match")]
    matcher: Matcher,
    replies: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Matcher {
    instruction_regex: String,
}

#[derive(Debug, Clone)]
struct Rule {
    pattern: Regex,
    replies: Vec<String>,
}

/// Fixture-driven backend.
///
/// Each rule's regex is tried in file order against the user utterances of
/// the request joined by newlines (retry feedback excluded). The first match
/// answers with `replies[r]`, where `r` counts the retry-feedback messages
/// after the last real utterance, clamped to the last reply.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    rules: Vec<Rule>,
}

impl ScriptedBackend {
    pub fn from_json(text: &str) -> Result<Self, IoError> {
        let raw: Vec<RuleFile> = serde_json::from_str(text)?;
        let rules = raw
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                if r.replies.is_empty() {
                    return Err(IoError::Format(format!("rule {i} has no replies")));
                }
                let pattern = Regex::new(&r.matcher.instruction_regex)
                    .map_err(|e| IoError::Format(format!("rule {i}: {e}")))?;
                Ok(Rule {
                    pattern,
                    replies: r.replies,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { rules })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IoError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let users: Vec<&ChatMessage> = request.messages.iter().filter(|m| m.role == Role::User).collect();
        let utterances: Vec<&str> = users
            .iter()
            .filter(|m| !m.content.starts_with(RETRY_PREFIX))
            .map(|m| m.content.as_str())
            .collect();
        let retries = users
            .iter()
            .rev()
            .take_while(|m| m.content.starts_with(RETRY_PREFIX))
            .count();
        let joined = utterances.join("\n");
        let rule = self
            .rules
            .iter()
            .find(|r| r.pattern.is_match(&joined))
            .ok_or_else(|| BackendError::NoMatch(joined.clone()))?;
        Ok(rule.replies[retries.min(rule.replies.len() - 1)].clone())
    }
}
