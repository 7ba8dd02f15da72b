//! Session service and batch front end for the partgrasp pipeline.

pub mod config;
pub mod http_backend;
pub mod replay;
pub mod server;
pub mod session;

pub use config::{BackendKind, PipelineConfig, ServiceConfig};
pub use session::{MessageOutcome, Session, SessionError, SessionState, StepResult};
