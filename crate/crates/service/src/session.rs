//! One operator session: dialogue, then step-by-step execution of the
//! accepted action sequence on the session's rendered frame.

use std::fmt;
use std::sync::Arc;

use partgrasp::grasp::{detect_grasps, GraspError, GraspRecord, GraspSet};
use partgrasp::localization::{locate, LocateError, RoiStats, StructuringElement};
use partgrasp::localization::GroundTruthSegmenter;
use partgrasp::perception::{
    converse, infer_action_sequence, is_confirmation, next_step, Action, ActionSequence, ActionStep, ChatBackend,
    DialogueHistory, EnvironmentContext, InferenceError, Turn,
};
use partgrasp::scene::{render, CameraIntrinsics, InventoryEntry, RgbdFrame, SceneDescription, SceneError, LABEL_BACKGROUND};
use partgrasp::{BinaryMask, IoError, TargetQuery};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Dialogue,
    SequenceReady,
    Executing,
    Done,
    Failed,
}

impl SessionState {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Dialogue => "dialogue",
            Self::SequenceReady => "sequence_ready",
            Self::Executing => "executing",
            Self::Done => "done",
            Self::Failed => "failed",
        }
    }

    /// Whether `self -> next` is a legal transition.
    pub fn can_become(self, next: SessionState) -> bool {
        use SessionState::*;
        matches!(
            (self, next),
            (Dialogue, SequenceReady)
                | (SequenceReady, Executing)
                | (SequenceReady, Done)
                | (SequenceReady, Failed)
                | (Executing, Executing)
                | (Executing, Done)
                | (Executing, Failed)
        )
    }
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("`{op}` is not allowed in state `{state}`")]
    State { op: &'static str, state: SessionState },
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Object part under a contact point, by ground-truth label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactLabel {
    pub label: u16,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub part: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFailure {
    pub code: String,
    pub message: String,
}

/// Echo of a simulated handover or place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub action: Action,
    pub object: String,
    /// Part the held grasp was planned on.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub held_part: Option<String>,
    pub grasp: GraspRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub destination: Option<TargetQuery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    /// 1-based step index from the sequence.
    pub index: usize,
    pub action: Action,
    pub target: TargetQuery,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roi: Option<RoiStats>,
    #[serde(default)]
    pub degraded: bool,
    /// Total collision-free candidates; `grasps` holds the best few.
    #[serde(default)]
    pub candidates: usize,
    #[serde(default)]
    pub grasps: Vec<GraspRecord>,
    /// Pixel of the top-1 grasp center.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top1_pixel: Option<[f64; 2]>,
    #[serde(default)]
    pub contact_labels: Vec<ContactLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotation: Option<Annotation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<StepFailure>,
}

impl StepResult {
    fn new(step: &ActionStep) -> Self {
        Self {
            index: step.index,
            action: step.action,
            target: step.target.clone(),
            roi: None,
            degraded: false,
            candidates: 0,
            grasps: Vec::new(),
            top1_pixel: None,
            contact_labels: Vec::new(),
            annotation: None,
            failure: None,
        }
    }

    fn fail(mut self, code: &str, message: impl Into<String>) -> Self {
        self.failure = Some(StepFailure {
            code: code.into(),
            message: message.into(),
        });
        self
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Masks and the full grasp set of a step, kept for the image endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct StepArtifacts {
    pub target_mask: BinaryMask,
    pub expanded_mask: BinaryMask,
    pub grasps: Option<GraspSet<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub result: StepResult,
    pub artifacts: Option<Arc<StepArtifacts>>,
}

#[derive(Debug, Clone, PartialEq)]
struct Held {
    object: String,
    part: Option<String>,
    grasp: GraspRecord,
}

/// Reply to a dialogue message.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MessageOutcome {
    Reply { text: String },
    Sequence { sequence: ActionSequence },
}

/// Deterministic session record: everything but the id.
#[derive(Debug, Serialize)]
pub struct SessionExport<'a> {
    pub scene_seed: u64,
    pub grasp_seed: u64,
    pub state: SessionState,
    pub transcript: &'a [Turn],
    pub sequence: Option<&'a ActionSequence>,
    pub cursor: usize,
    pub steps: Vec<&'a StepResult>,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    scene: Arc<SceneDescription<f64>>,
    frame: Arc<RgbdFrame<f64>>,
    env: Arc<EnvironmentContext>,
    config: PipelineConfig,
    history: DialogueHistory,
    state: SessionState,
    sequence: Option<ActionSequence>,
    cursor: usize,
    steps: Vec<StepRecord>,
    held: Option<Held>,
}

impl Session {
    /// Validates and renders the scene. The color image is encoded for the
    /// planner only when `with_image` is set.
    pub fn create(
        id: impl Into<String>,
        scene: SceneDescription<f64>,
        config: PipelineConfig,
        with_image: bool,
    ) -> Result<Self, SessionError> {
        let id = id.into();
        scene.validate()?;
        let frame = render(&scene)?;
        let env = EnvironmentContext::from_frame(&frame, "", with_image)?;
        Ok(Self {
            history: DialogueHistory::new(id.clone()),
            id,
            scene: Arc::new(scene),
            frame: Arc::new(frame),
            env: Arc::new(env),
            config,
            state: SessionState::Dialogue,
            sequence: None,
            cursor: 0,
            steps: Vec::new(),
            held: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn scene(&self) -> &SceneDescription<f64> {
        &self.scene
    }

    pub fn frame(&self) -> &RgbdFrame<f64> {
        &self.frame
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics<f64> {
        &self.frame.intrinsics
    }

    pub fn inventory(&self) -> &[InventoryEntry] {
        &self.env.inventory
    }

    pub fn history(&self) -> &DialogueHistory {
        &self.history
    }

    pub fn sequence(&self) -> Option<&ActionSequence> {
        self.sequence.as_ref()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    /// Record of the step with 1-based sequence index `index`.
    pub fn step(&self, index: usize) -> Option<&StepRecord> {
        self.steps.iter().find(|s| s.result.index == index)
    }

    /// Confirmations, and any message once `max_turns` turns are complete,
    /// ask for the action sequence; anything else gets a conversational reply.
    pub fn post_message(&mut self, backend: &dyn ChatBackend, text: &str) -> Result<MessageOutcome, SessionError> {
        if self.state != SessionState::Dialogue {
            return Err(SessionError::State {
                op: "post_message",
                state: self.state,
            });
        }
        let inference = &self.config.inference;
        if is_confirmation(text) || self.history.len() >= inference.max_turns {
            let sequence = infer_action_sequence(backend, &self.env, &mut self.history, text, inference)?;
            self.state = SessionState::SequenceReady;
            self.sequence = Some(sequence.clone());
            Ok(MessageOutcome::Sequence { sequence })
        } else {
            let text = converse(backend, &self.env, &mut self.history, text, inference)?;
            Ok(MessageOutcome::Reply { text })
        }
    }

    /// Runs the step under the cursor. Failures are recorded in the result
    /// and move the session to `failed`.
    pub fn execute_step(&mut self) -> Result<&StepResult, SessionError> {
        if !matches!(self.state, SessionState::SequenceReady | SessionState::Executing) {
            return Err(SessionError::State {
                op: "execute_step",
                state: self.state,
            });
        }
        let seq = self.sequence.as_ref().expect("sequence is set once the dialogue ends");
        let step = next_step(seq, self.cursor)
            .ok()
            .flatten()
            .expect("cursor stays below the step count while executing")
            .clone();
        let n = seq.len();
        let record = self.run(&step);
        self.cursor += 1;
        self.state = if !record.result.succeeded() {
            SessionState::Failed
        } else if self.cursor == n {
            SessionState::Done
        } else {
            SessionState::Executing
        };
        log::info!("session {} step {}: {}", self.id, step.index, self.state);
        self.steps.push(record);
        Ok(&self.steps.last().expect("just pushed").result)
    }

    fn element(&self) -> StructuringElement {
        match self.config.element_half {
            Some(h) => StructuringElement::new(h, h),
            None => StructuringElement::default_for_width(self.frame.width()),
        }
    }

    fn run(&mut self, step: &ActionStep) -> StepRecord {
        let result = StepResult::new(step);
        match step.action {
            Action::Detect | Action::Grasp => self.perceive(step, result),
            Action::Handover | Action::Place => StepRecord {
                result: self.release(step, result),
                artifacts: None,
            },
        }
    }

    fn perceive(&mut self, step: &ActionStep, mut result: StepResult) -> StepRecord {
        let loc = match locate(&self.frame, &step.target, &GroundTruthSegmenter, &self.element()) {
            Ok(loc) => loc,
            Err(e) => {
                let code = match e {
                    LocateError::EmptyMask(_) => "empty_mask",
                    LocateError::EmptyTarget(_) => "empty_target",
                };
                return StepRecord {
                    result: result.fail(code, e.to_string()),
                    artifacts: None,
                };
            }
        };
        result.roi = Some(loc.stats);
        result.degraded = loc.degraded;
        let mut artifacts = StepArtifacts {
            target_mask: loc.target_mask,
            expanded_mask: loc.expanded_mask,
            grasps: None,
        };
        if step.action == Action::Grasp {
            match detect_grasps(&loc.roi, &self.config.grasp) {
                Ok(set) => {
                    let top = set.top().expect("detect_grasps returns at least one candidate");
                    let (u, v) = self.frame.intrinsics.project(&top.translation);
                    result.top1_pixel = Some([u, v]);
                    result.contact_labels = top
                        .contacts
                        .iter()
                        .map(|&i| self.contact_label(loc.roi.pixels()[i]))
                        .collect();
                    result.candidates = set.candidates.len();
                    result.grasps = set.export(self.config.top_n);
                    let part = step
                        .target
                        .part
                        .clone()
                        .or_else(|| result.contact_labels.iter().find_map(|c| c.part.clone()));
                    self.held = Some(Held {
                        object: step.target.object.clone(),
                        part,
                        grasp: GraspRecord::from_pose(top),
                    });
                    artifacts.grasps = Some(set);
                }
                Err(e) => {
                    let code = match e {
                        GraspError::NoTarget => "no_target",
                        GraspError::Normals(_) => "normals",
                        GraspError::InvalidGripper => "invalid_gripper",
                        GraspError::NoGrasp { .. } => "no_grasp",
                    };
                    result = result.fail(code, e.to_string());
                }
            }
        }
        StepRecord {
            result,
            artifacts: Some(Arc::new(artifacts)),
        }
    }

    fn contact_label(&self, pixel: [u32; 2]) -> ContactLabel {
        let label = *self.frame.labels.get(pixel[0] as usize, pixel[1] as usize);
        let key = self.frame.label_index.key(label);
        ContactLabel {
            label,
            object: key
                .map(|k| k.object.clone())
                .or_else(|| (label == LABEL_BACKGROUND).then(|| "background".to_string())),
            part: key.map(|k| k.part.clone()),
        }
    }

    /// Handover and place are not executed; the result echoes the held grasp.
    fn release(&mut self, step: &ActionStep, result: StepResult) -> StepResult {
        let held = match self.held.take() {
            Some(h) if h.object.trim().eq_ignore_ascii_case(step.target.object.trim()) => h,
            other => {
                self.held = other;
                return result.fail(
                    "not_held",
                    format!("`{}` must be grasped before `{}`", step.target.object, step.action.as_str()),
                );
            }
        };
        StepResult {
            annotation: Some(Annotation {
                action: step.action,
                object: held.object,
                held_part: held.part,
                grasp: held.grasp,
                destination: step.params.destination.clone(),
            }),
            ..result
        }
    }

    pub fn export(&self) -> SessionExport<'_> {
        SessionExport {
            scene_seed: self.scene.seed,
            grasp_seed: self.config.grasp.seed,
            state: self.state,
            transcript: self.history.turns(),
            sequence: self.sequence.as_ref(),
            cursor: self.cursor,
            steps: self.steps.iter().map(|s| &s.result).collect(),
        }
    }

    /// Pretty JSON of [`Session::export`]; byte-identical across replays.
    pub fn export_json(&self) -> String {
        serde_json::to_string_pretty(&self.export()).expect("session export always serializes")
    }
}
