use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One completed exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub user: String,
    pub reply: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum HistoryError {
    #[error("a user utterance is already awaiting a reply")]
    AlreadyPending,
    #[error("no user utterance is awaiting a reply")]
    NothingPending,
}

/// Completed turns plus at most one user utterance awaiting its reply.
///
/// Turns are append-only: a pending utterance either completes into a new
/// turn or is rolled back, never edited in place.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueHistory {
    session_id: String,
    turns: Vec<Turn>,
    pending: Option<String>,
}

impl DialogueHistory {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            turns: Vec::new(),
            pending: None,
        }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn pending(&self) -> Option<&str> {
        self.pending.as_deref()
    }

    pub fn begin(&mut self, user: impl Into<String>) -> Result<(), HistoryError> {
        if self.pending.is_some() {
            return Err(HistoryError::AlreadyPending);
        }
        self.pending = Some(user.into());
        Ok(())
    }

    pub fn complete(&mut self, reply: impl Into<String>) -> Result<&Turn, HistoryError> {
        let user = self.pending.take().ok_or(HistoryError::NothingPending)?;
        self.turns.push(Turn {
            user,
            reply: reply.into(),
        });
        Ok(self.turns.last().expect("just pushed"))
    }

    /// Drops the pending utterance, leaving the history as before `begin`.
    pub fn rollback(&mut self) -> Option<String> {
        self.pending.take()
    }
}

/// True when the utterance asks to execute, e.g. "Confirm execution".
pub fn is_confirmation(text: &str) -> bool {
    let normalized: String = text
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    normalized.starts_with("confirm")
}
