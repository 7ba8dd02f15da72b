//! Structured action sequences and their validating parser.
//!
//! Wire format:
//!
//! ```json
//! {"task_description": "...",
//!  "steps": [{"index": 1, "action": "grasp",
//!             "target": {"object": "hammer", "part": "head", "features": []},
//!             "params": {"destination": {"object": "box"}}}]}
//! ```
//!
//! Parsing walks a [`serde_json::Value`] by hand so that every violation is
//! reported with a stable code and a JSON path, not just the first one.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::query::TargetQuery;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Detect,
    Grasp,
    Place,
    Handover,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Detect, Action::Grasp, Action::Place, Action::Handover];

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Detect => "detect",
            Action::Grasp => "grasp",
            Action::Place => "place",
            Action::Handover => "handover",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StepParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub destination: Option<TargetQuery>,
}

impl StepParams {
    fn is_empty(&self) -> bool {
        self.destination.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActionStep {
    pub index: usize,
    pub action: Action,
    pub target: TargetQuery,
    #[serde(default, skip_serializing_if = "StepParams::is_empty")]
    pub params: StepParams,
}

/// A task description and its ordered steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActionSequence {
    pub task_description: String,
    pub steps: Vec<ActionStep>,
}

/// Difficulty class of an instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstructionLevel {
    Simple,
    Ordinary,
    Complex,
}

impl InstructionLevel {
    pub const ALL: [InstructionLevel; 3] = [Self::Simple, Self::Ordinary, Self::Complex];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Simple => "simple",
            Self::Ordinary => "ordinary",
            Self::Complex => "complex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticCode {
    InvalidJson,
    MissingField,
    WrongType,
    UnknownAction,
    EmptySteps,
    IndexOrder,
    DuplicateIndex,
    EmptyName,
    MissingDestination,
    SequenceOrder,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::InvalidJson => "invalid_json",
            Self::MissingField => "missing_field",
            Self::WrongType => "wrong_type",
            Self::UnknownAction => "unknown_action",
            Self::EmptySteps => "empty_steps",
            Self::IndexOrder => "index_order",
            Self::DuplicateIndex => "duplicate_index",
            Self::EmptyName => "empty_name",
            Self::MissingDestination => "missing_destination",
            Self::SequenceOrder => "sequence_order",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    /// JSON path of the offending value, e.g. `$.steps[1].action`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.code, self.path, self.message)
    }
}

/// All violations found in one reply. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaError {
    pub diagnostics: Vec<Diagnostic>,
}

impl SchemaError {
    fn single(code: DiagnosticCode, path: &str, message: impl Into<String>) -> Self {
        Self {
            diagnostics: vec![Diagnostic {
                code,
                path: path.to_string(),
                message: message.into(),
            }],
        }
    }

    pub fn codes(&self) -> Vec<DiagnosticCode> {
        self.diagnostics.iter().map(|d| d.code).collect()
    }

    pub fn has(&self, code: DiagnosticCode) -> bool {
        self.diagnostics.iter().any(|d| d.code == code)
    }
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for SchemaError {}

/// Returns the first balanced `{...}` block in `text`, skipping braces inside
/// JSON strings. Models often wrap the object in prose or code fences.
/// An unclosed object yields `None` rather than one of its nested fragments.
pub fn extract_json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in text.as_bytes().iter().enumerate().skip(start) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Extracts the outermost JSON object from `raw` and validates it.
pub fn parse_action_sequence(raw: &str) -> Result<ActionSequence, SchemaError> {
    let Some(body) = extract_json_object(raw) else {
        return Err(SchemaError::single(DiagnosticCode::InvalidJson, "$", "no complete JSON object in reply"));
    };
    let value: Value = serde_json::from_str(body)
        .map_err(|e| SchemaError::single(DiagnosticCode::InvalidJson, "$", e.to_string()))?;
    ActionSequence::from_value(&value)
}

struct Checker {
    diagnostics: Vec<Diagnostic>,
}

impl Checker {
    fn push(&mut self, code: DiagnosticCode, path: impl Into<String>, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            code,
            path: path.into(),
            message: message.into(),
        });
    }

    fn field<'v>(&mut self, obj: &'v Map<String, Value>, path: &str, key: &str) -> Option<&'v Value> {
        match obj.get(key) {
            Some(v) => Some(v),
            None => {
                self.push(DiagnosticCode::MissingField, format!("{path}.{key}"), format!("missing required field `{key}`"));
                None
            }
        }
    }

    fn object<'v>(&mut self, v: &'v Value, path: &str) -> Option<&'v Map<String, Value>> {
        let o = v.as_object();
        if o.is_none() {
            self.push(DiagnosticCode::WrongType, path, format!("expected object, found {}", kind(v)));
        }
        o
    }

    fn name(&mut self, v: &Value, path: &str) -> Option<String> {
        match v.as_str() {
            None => {
                self.push(DiagnosticCode::WrongType, path, format!("expected string, found {}", kind(v)));
                None
            }
            Some(s) if s.trim().is_empty() => {
                self.push(DiagnosticCode::EmptyName, path, "name must not be empty");
                None
            }
            Some(s) => Some(s.to_string()),
        }
    }

    fn target(&mut self, v: &Value, path: &str) -> Option<TargetQuery> {
        let obj = self.object(v, path)?;
        let object = self.field(obj, path, "object").and_then(|o| self.name(o, &format!("{path}.object")));
        let part = match obj.get("part") {
            None | Some(Value::Null) => Some(None),
            Some(p) => self.name(p, &format!("{path}.part")).map(Some),
        };
        let features = match obj.get("features") {
            None | Some(Value::Null) => Some(Vec::new()),
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                let mut ok = true;
                for (i, f) in items.iter().enumerate() {
                    match f.as_str() {
                        Some(s) => out.push(s.to_string()),
                        None => {
                            ok = false;
                            self.push(
                                DiagnosticCode::WrongType,
                                format!("{path}.features[{i}]"),
                                format!("expected string, found {}", kind(f)),
                            );
                        }
                    }
                }
                ok.then_some(out)
            }
            Some(other) => {
                self.push(
                    DiagnosticCode::WrongType,
                    format!("{path}.features"),
                    format!("expected array, found {}", kind(other)),
                );
                None
            }
        };
        Some(TargetQuery {
            object: object?,
            part: part?,
            features: features?,
        })
    }

    fn index(&mut self, v: &Value, path: &str) -> Option<usize> {
        match v.as_u64() {
            Some(n) => Some(n as usize),
            None if v.as_i64().is_some() => {
                self.push(DiagnosticCode::IndexOrder, path, "index must be a positive integer");
                None
            }
            None => {
                self.push(DiagnosticCode::WrongType, path, format!("expected integer, found {}", kind(v)));
                None
            }
        }
    }

    fn step(&mut self, v: &Value, path: &str) -> Option<ActionStep> {
        let obj = self.object(v, path)?;
        let index = self.field(obj, path, "index").and_then(|i| self.index(i, &format!("{path}.index")));
        let action = self.field(obj, path, "action").and_then(|a| {
            let p = format!("{path}.action");
            match a.as_str() {
                Some(s) => {
                    let parsed = Action::parse(s.trim().to_ascii_lowercase().as_str());
                    if parsed.is_none() {
                        self.push(
                            DiagnosticCode::UnknownAction,
                            p,
                            format!("`{s}` is not one of detect, grasp, place, handover"),
                        );
                    }
                    parsed
                }
                None => {
                    self.push(DiagnosticCode::WrongType, p, format!("expected string, found {}", kind(a)));
                    None
                }
            }
        });
        let target = self.field(obj, path, "target").and_then(|t| self.target(t, &format!("{path}.target")));
        let params = match obj.get("params") {
            None | Some(Value::Null) => Some(StepParams::default()),
            Some(p) => {
                let pp = format!("{path}.params");
                self.object(p, &pp).and_then(|m| match m.get("destination") {
                    None | Some(Value::Null) => Some(StepParams::default()),
                    Some(d) => self
                        .target(d, &format!("{pp}.destination"))
                        .map(|q| StepParams { destination: Some(q) }),
                })
            }
        };
        if action == Some(Action::Place) && params.as_ref().is_some_and(|p| p.destination.is_none()) {
            self.push(
                DiagnosticCode::MissingDestination,
                format!("{path}.params.destination"),
                "place requires a destination",
            );
            return None;
        }
        Some(ActionStep {
            index: index?,
            action: action?,
            target: target?,
            params: params?,
        })
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn same_object(a: &TargetQuery, b: &TargetQuery) -> bool {
    a.object.trim().eq_ignore_ascii_case(b.object.trim())
}

impl ActionSequence {
    /// Validates a parsed JSON value.
    pub fn from_value(value: &Value) -> Result<Self, SchemaError> {
        let mut c = Checker { diagnostics: Vec::new() };
        let seq = c.sequence(value);
        match seq {
            Some(seq) if c.diagnostics.is_empty() => Ok(seq),
            _ => Err(SchemaError {
                diagnostics: c.diagnostics,
            }),
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("action sequences always serialize")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("action sequences always serialize")
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl Checker {
    fn sequence(&mut self, v: &Value) -> Option<ActionSequence> {
        let obj = self.object(v, "$")?;
        let task = self.field(obj, "$", "task_description").and_then(|t| match t.as_str() {
            Some(s) => Some(s.to_string()),
            None => {
                self.push(
                    DiagnosticCode::WrongType,
                    "$.task_description",
                    format!("expected string, found {}", kind(t)),
                );
                None
            }
        });
        let items = self.field(obj, "$", "steps").and_then(|s| match s.as_array() {
            Some(a) => Some(a),
            None => {
                self.push(DiagnosticCode::WrongType, "$.steps", format!("expected array, found {}", kind(s)));
                None
            }
        });
        let items = items?;
        if items.is_empty() {
            self.push(DiagnosticCode::EmptySteps, "$.steps", "at least one step is required");
            return None;
        }
        let steps: Vec<Option<ActionStep>> = items
            .iter()
            .enumerate()
            .map(|(i, s)| self.step(s, &format!("$.steps[{i}]")))
            .collect();
        let steps: Vec<ActionStep> = steps.into_iter().collect::<Option<_>>()?;

        let mut seen = std::collections::HashSet::new();
        for (i, s) in steps.iter().enumerate() {
            if !seen.insert(s.index) {
                self.push(
                    DiagnosticCode::DuplicateIndex,
                    format!("$.steps[{i}].index"),
                    format!("index {} appears more than once", s.index),
                );
            }
        }
        if seen.len() == steps.len() {
            for (i, s) in steps.iter().enumerate() {
                if s.index != i + 1 {
                    self.push(
                        DiagnosticCode::IndexOrder,
                        format!("$.steps[{i}].index"),
                        format!("expected index {}, found {}", i + 1, s.index),
                    );
                    break;
                }
            }
        }
        for (i, s) in steps.iter().enumerate() {
            if matches!(s.action, Action::Place | Action::Handover)
                && !steps[..i]
                    .iter()
                    .any(|p| p.action == Action::Grasp && same_object(&p.target, &s.target))
            {
                self.push(
                    DiagnosticCode::SequenceOrder,
                    format!("$.steps[{i}]"),
                    format!("{} of `{}` has no earlier grasp of it", s.action, s.target.object),
                );
            }
        }
        Some(ActionSequence {
            task_description: task?,
            steps,
        })
    }
}

/// Step after `cursor` completed steps, or `None` when all are done.
pub fn next_step(seq: &ActionSequence, cursor: usize) -> Result<Option<&ActionStep>, CursorOutOfRange> {
    match cursor.cmp(&seq.steps.len()) {
        std::cmp::Ordering::Less => Ok(Some(&seq.steps[cursor])),
        std::cmp::Ordering::Equal => Ok(None),
        std::cmp::Ordering::Greater => Err(CursorOutOfRange {
            cursor,
            len: seq.steps.len(),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("cursor {cursor} is beyond the {len}-step sequence")]
pub struct CursorOutOfRange {
    pub cursor: usize,
    pub len: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    const HANDOVER: &str = r#"{"task_description":"hand over the hammer",
        "steps":[{"index":1,"action":"grasp","target":{"object":"hammer","part":"head"}},
                 {"index":2,"action":"handover","target":{"object":"hammer"}}]}"#;

    #[test]
    fn parses_and_round_trips() {
        let seq = parse_action_sequence(HANDOVER).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.steps[0].target, TargetQuery::part("hammer", "head"));
        assert_eq!(parse_action_sequence(&seq.to_json()).unwrap(), seq);
    }

    #[test]
    fn extracts_object_from_prose() {
        let raw = format!("Sure! Here it is:\n```json\n{HANDOVER}\n```\nLet me know {{if}} needed.");
        assert!(parse_action_sequence(&raw).is_ok());
        assert_eq!(extract_json_object(r#"x {"a":"}{"} y"#), Some(r#"{"a":"}{"}"#));
        assert_eq!(extract_json_object("{ unterminated"), None);
        assert_eq!(extract_json_object(r#"{"steps":[{"index":1}"#), None);
    }

    #[test]
    fn empty_steps() {
        let e = parse_action_sequence(r#"{"task_description":"x","steps":[]}"#).unwrap_err();
        assert_eq!(e.codes(), vec![DiagnosticCode::EmptySteps]);
    }

    #[test]
    fn unknown_action() {
        let e = parse_action_sequence(
            r#"{"task_description":"x","steps":[{"index":1,"action":"throw","target":{"object":"pen"}}]}"#,
        )
        .unwrap_err();
        assert_eq!(e.codes(), vec![DiagnosticCode::UnknownAction]);
        assert_eq!(e.diagnostics[0].path, "$.steps[0].action");
    }

    #[test]
    fn place_needs_destination_and_prior_grasp() {
        let e = parse_action_sequence(
            r#"{"task_description":"x","steps":[{"index":1,"action":"grasp","target":{"object":"pen"}},
                {"index":2,"action":"place","target":{"object":"pen"}}]}"#,
        )
        .unwrap_err();
        assert_eq!(e.codes(), vec![DiagnosticCode::MissingDestination]);
        let e = parse_action_sequence(
            r#"{"task_description":"x","steps":[{"index":1,"action":"handover","target":{"object":"pen"}}]}"#,
        )
        .unwrap_err();
        assert_eq!(e.codes(), vec![DiagnosticCode::SequenceOrder]);
    }

    #[test]
    fn cursor() {
        let seq = parse_action_sequence(HANDOVER).unwrap();
        assert_eq!(next_step(&seq, 0).unwrap().unwrap().index, 1);
        assert_eq!(next_step(&seq, 2).unwrap(), None);
        assert_eq!(next_step(&seq, 3), Err(CursorOutOfRange { cursor: 3, len: 2 }));
    }
}
