//! Batch runs of a dialogue script against one scene.

use std::path::Path;

use partgrasp::perception::ChatBackend;
use partgrasp::scene::{export_frame, SceneDescription};
use partgrasp::IoError;

use crate::config::PipelineConfig;
use crate::session::{MessageOutcome, Session, SessionError, SessionState};

/// Script messages: one per line, blank lines and `#` comments skipped.
pub fn script_lines(text: &str) -> Vec<&str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

/// Sends every message, then executes the sequence until the session is
/// done or failed. Stops early once a sequence is accepted; later lines are
/// ignored with a warning.
pub fn replay(
    scene: SceneDescription<f64>,
    messages: &[&str],
    config: PipelineConfig,
    backend: &dyn ChatBackend,
) -> Result<Session, SessionError> {
    let mut session = Session::create("replay", scene, config, backend.supports_images())?;
    for (i, m) in messages.iter().enumerate() {
        if let MessageOutcome::Sequence { .. } = session.post_message(backend, m)? {
            if i + 1 < messages.len() {
                log::warn!("ignoring {} script lines after the sequence", messages.len() - i - 1);
            }
            break;
        }
    }
    while matches!(session.state(), SessionState::SequenceReady | SessionState::Executing) {
        session.execute_step()?;
    }
    Ok(session)
}

/// Writes `session.json`, the rendered frame under `frame/`, and per step
/// `step_<i>_target.png`, `step_<i>_expanded.png` and `step_<i>_grasps.json`.
pub fn write_outputs(session: &Session, dir: impl AsRef<Path>, top_n: usize) -> Result<(), IoError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("session.json"), session.export_json())?;
    export_frame(session.frame(), dir.join("frame"))?;
    for step in session.steps() {
        let Some(a) = &step.artifacts else { continue };
        let i = step.result.index;
        a.target_mask.save_png(dir.join(format!("step_{i}_target.png")))?;
        a.expanded_mask.save_png(dir.join(format!("step_{i}_expanded.png")))?;
        if let Some(set) = &a.grasps {
            set.save_json(dir.join(format!("step_{i}_grasps.json")), top_n)?;
        }
    }
    Ok(())
}
