//! Dialogue state, chat backends and the action-sequence schema.

mod backend;
mod dialogue;
mod infer;
mod schema;

pub use backend::{BackendError, ChatBackend, ChatMessage, ChatRequest, Role, ScriptedBackend, RETRY_PREFIX};
pub use dialogue::{is_confirmation, DialogueHistory, HistoryError, Turn};
pub use infer::{
    build_context_prompt, converse, infer_action_sequence, EnvironmentContext, FailedAttempt, InferenceConfig,
    InferenceError,
};
pub use schema::{
    extract_json_object, next_step, parse_action_sequence, Action, ActionSequence, ActionStep, CursorOutOfRange,
    Diagnostic, DiagnosticCode, InstructionLevel, SchemaError, StepParams,
};
