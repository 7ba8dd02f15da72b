use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use super::backend::{BackendError, ChatBackend, ChatMessage, ChatRequest, Role, RETRY_PREFIX};
use super::dialogue::{DialogueHistory, HistoryError};
use super::schema::{parse_action_sequence, ActionSequence, SchemaError};
use crate::error::IoError;
use crate::scalar::Real;
use crate::scene::{color_png_bytes, InventoryEntry, RgbdFrame};

const PREAMBLE: &str = "You are the task planner of a robot arm with a two-finger gripper.
Talk with the user until the task is clear. Ask a short question when the request is ambiguous.
When asked to emit the plan, reply with one JSON object and nothing else:
{\"task_description\": string,
 \"steps\": [{\"index\": 1, \"action\": \"detect\" | \"grasp\" | \"place\" | \"handover\",
            \"target\": {\"object\": string, \"part\": string (optional), \"features\": [string]},
            \"params\": {\"destination\": target (required for place)}}]}
Indices start at 1 and increase by one. Grasp an object before placing or handing it over.
Name the functional part to grasp when it matters, e.g. a handle or a head.";

const EMIT: &str = "Emit the action sequence now as a single JSON object.";

/// What the planner knows about the scene.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnvironmentContext {
    pub inventory: Vec<InventoryEntry>,
    pub summary: String,
    /// Color image of the session frame, PNG-encoded.
    pub image_png: Option<Vec<u8>>,
}

impl EnvironmentContext {
    /// Inventory from the frame's label raster; the image is attached when
    /// `with_image` is set.
    pub fn from_frame<T: Real>(frame: &RgbdFrame<T>, summary: impl Into<String>, with_image: bool) -> Result<Self, IoError> {
        Ok(Self {
            inventory: frame.visible_inventory(),
            summary: summary.into(),
            image_png: if with_image { Some(color_png_bytes(frame)?) } else { None },
        })
    }

    fn block(&self) -> String {
        let mut s = String::from("Visible objects:\n");
        for e in &self.inventory {
            let _ = writeln!(s, "object: {} (parts: {})", e.object, e.parts.join(", "));
        }
        if !self.summary.is_empty() {
            let _ = writeln!(s, "Scene: {}", self.summary);
        }
        s
    }
}

/// Decoding and dialogue limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    /// Extra attempts after a reply fails validation.
    pub retries: usize,
    pub temperature: f64,
    /// Completed turns after which the next message forces emission.
    pub max_turns: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            retries: 2,
            temperature: 0.0,
            max_turns: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("reply failed validation after {} attempts: {}", .attempts.len(), .attempts.last().map(|a| a.error.to_string()).unwrap_or_default())]
    MalformedOutput { attempts: Vec<FailedAttempt> },
    #[error(transparent)]
    History(#[from] HistoryError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedAttempt {
    pub raw: String,
    pub error: SchemaError,
}

/// Preamble, environment block, then every turn in order (and the pending
/// utterance, if any). Deterministic.
pub fn build_context_prompt(env: &EnvironmentContext, history: &DialogueHistory) -> String {
    let mut s = format!("{PREAMBLE}\n\n{}", env.block());
    s.push_str("\nDialogue:\n");
    for t in history.turns() {
        let _ = writeln!(s, "User: {}", t.user);
        let _ = writeln!(s, "Assistant: {}", t.reply);
    }
    if let Some(p) = history.pending() {
        let _ = writeln!(s, "User: {p}");
    }
    s
}

fn base_messages(env: &EnvironmentContext, history: &DialogueHistory) -> Vec<ChatMessage> {
    let mut messages = vec![ChatMessage::new(Role::System, format!("{PREAMBLE}\n\n{}", env.block()))];
    for t in history.turns() {
        messages.push(ChatMessage::new(Role::User, t.user.clone()));
        messages.push(ChatMessage::new(Role::Assistant, t.reply.clone()));
    }
    if let Some(p) = history.pending() {
        messages.push(ChatMessage::new(Role::User, p));
    }
    messages
}

fn request(backend: &dyn ChatBackend, env: &EnvironmentContext, messages: Vec<ChatMessage>, config: &InferenceConfig) -> ChatRequest {
    ChatRequest {
        messages,
        temperature: config.temperature,
        image_png: env.image_png.clone().filter(|_| backend.supports_images()),
    }
}

/// Free-form exchange: sends `utterance` and records the reply as a turn.
/// On failure the history is unchanged.
pub fn converse(
    backend: &dyn ChatBackend,
    env: &EnvironmentContext,
    history: &mut DialogueHistory,
    utterance: &str,
    config: &InferenceConfig,
) -> Result<String, InferenceError> {
    history.begin(utterance)?;
    let req = request(backend, env, base_messages(env, history), config);
    match backend.complete(&req) {
        Ok(reply) => {
            history.complete(reply.clone())?;
            Ok(reply)
        }
        Err(e) => {
            history.rollback();
            Err(e.into())
        }
    }
}

/// Sends `utterance` and asks for the action sequence. Replies that fail
/// validation are returned to the backend with the diagnostics, up to
/// `config.retries` times. On success the accepted reply completes the turn;
/// on failure the history is unchanged.
pub fn infer_action_sequence(
    backend: &dyn ChatBackend,
    env: &EnvironmentContext,
    history: &mut DialogueHistory,
    utterance: &str,
    config: &InferenceConfig,
) -> Result<ActionSequence, InferenceError> {
    history.begin(utterance)?;
    let result = attempt(backend, env, history, config);
    match result {
        Ok((seq, raw)) => {
            history.complete(raw)?;
            Ok(seq)
        }
        Err(e) => {
            history.rollback();
            Err(e)
        }
    }
}

fn attempt(
    backend: &dyn ChatBackend,
    env: &EnvironmentContext,
    history: &DialogueHistory,
    config: &InferenceConfig,
) -> Result<(ActionSequence, String), InferenceError> {
    let mut messages = base_messages(env, history);
    messages.push(ChatMessage::new(Role::System, EMIT));
    let mut attempts = Vec::new();
    for _ in 0..=config.retries {
        let raw = backend.complete(&request(backend, env, messages.clone(), config))?;
        match parse_action_sequence(&raw) {
            Ok(seq) => return Ok((seq, raw)),
            Err(error) => {
                log::warn!("action sequence rejected: {error}");
                messages.push(ChatMessage::new(Role::Assistant, raw.clone()));
                messages.push(ChatMessage::new(Role::User, format!("{RETRY_PREFIX} {error}")));
                attempts.push(FailedAttempt { raw, error });
            }
        }
    }
    Err(InferenceError::MalformedOutput { attempts })
}
