//! Mechanical grading of predicted sequences against gold annotations.
//!
//! Conventions:
//! - `r = 1` iff the multisets of (action, object) pairs are equal.
//! - Fields are the leaves of each predicted step: `index`, `action`,
//!   `target.object`, `target.part`, `params.destination.object` and
//!   `params.destination.part`, compared with the gold value at the same path
//!   after trimming and lowercasing. Free text (`task_description`,
//!   `features`) is not graded. `f_total` counts predicted fields.
//! - A substructure is an (object, part) pair from the gold annotation; it is
//!   recovered when some predicted target or destination names both. A gold
//!   substructure without a part is recovered by naming the object.
//! - An unparseable prediction grades as `(0, 0, 1, 0, s_total)`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::metrics::InstructionRecord;
use crate::error::IoError;
use crate::perception::{parse_action_sequence, ActionSequence, InstructionLevel};
use crate::query::TargetQuery;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Substructure {
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldRecord {
    pub instruction: String,
    pub level: InstructionLevel,
    pub expected_sequence: ActionSequence,
    pub expected_substructures: Vec<Substructure>,
}

#[derive(Deserialize)]
struct GoldRecordFile {
    instruction: String,
    level: InstructionLevel,
    expected_sequence: Value,
    #[serde(default)]
    expected_substructures: Vec<Substructure>,
}

#[derive(Serialize)]
struct GoldRecordOut<'a> {
    instruction: &'a str,
    level: InstructionLevel,
    expected_sequence: &'a ActionSequence,
    expected_substructures: &'a [Substructure],
}

/// Parses a gold-annotation file, validating every expected sequence.
pub fn parse_gold(text: &str) -> Result<Vec<GoldRecord>, IoError> {
    let raw: Vec<GoldRecordFile> = serde_json::from_str(text)?;
    raw.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let expected_sequence = ActionSequence::from_value(&r.expected_sequence)
                .map_err(|e| IoError::Format(format!("gold record {i}: {e}")))?;
            Ok(GoldRecord {
                instruction: r.instruction,
                level: r.level,
                expected_sequence,
                expected_substructures: r.expected_substructures,
            })
        })
        .collect()
}

pub fn load_gold(path: impl AsRef<Path>) -> Result<Vec<GoldRecord>, IoError> {
    parse_gold(&std::fs::read_to_string(path)?)
}

pub fn gold_to_json(records: &[GoldRecord]) -> String {
    let out: Vec<GoldRecordOut> = records
        .iter()
        .map(|r| GoldRecordOut {
            instruction: &r.instruction,
            level: r.level,
            expected_sequence: &r.expected_sequence,
            expected_substructures: &r.expected_substructures,
        })
        .collect();
    serde_json::to_string_pretty(&out).expect("gold records always serialize")
}

/// A model's raw reply to one instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub instruction: String,
    pub output: String,
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>, IoError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grade {
    pub r: u8,
    pub f_correct: usize,
    pub f_total: usize,
    pub s_correct: usize,
    pub s_total: usize,
}

fn norm(s: &str) -> String {
    s.trim().to_lowercase()
}

fn pairs(seq: &ActionSequence) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = seq
        .steps
        .iter()
        .map(|s| (s.action.as_str().to_string(), norm(&s.target.object)))
        .collect();
    v.sort();
    v
}

fn push_target(out: &mut BTreeMap<String, String>, prefix: &str, t: &TargetQuery) {
    out.insert(format!("{prefix}.object"), norm(&t.object));
    if let Some(p) = &t.part {
        out.insert(format!("{prefix}.part"), norm(p));
    }
}

/// Graded fields of a sequence, keyed by path.
pub fn flatten_fields(seq: &ActionSequence) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for (i, s) in seq.steps.iter().enumerate() {
        let p = format!("steps[{i}]");
        out.insert(format!("{p}.index"), s.index.to_string());
        out.insert(format!("{p}.action"), s.action.as_str().to_string());
        push_target(&mut out, &format!("{p}.target"), &s.target);
        if let Some(d) = &s.params.destination {
            push_target(&mut out, &format!("{p}.params.destination"), d);
        }
    }
    out
}

fn targets(seq: &ActionSequence) -> impl Iterator<Item = &TargetQuery> {
    seq.steps
        .iter()
        .flat_map(|s| std::iter::once(&s.target).chain(s.params.destination.as_ref()))
}

/// Gold substructures, or the distinct gold targets when none are annotated.
fn expected_subs(gold: &ActionSequence, annotated: &[Substructure]) -> Vec<Substructure> {
    if !annotated.is_empty() {
        return annotated.to_vec();
    }
    let mut out: Vec<Substructure> = Vec::new();
    for t in targets(gold) {
        let s = Substructure {
            object: norm(&t.object),
            part: t.part.as_deref().map(norm),
        };
        if !out.contains(&s) {
            out.push(s);
        }
    }
    // an object-only target adds nothing when a part of that object is named
    let named: Vec<String> = out.iter().filter(|s| s.part.is_some()).map(|s| s.object.clone()).collect();
    out.retain(|s| s.part.is_some() || !named.contains(&s.object));
    out
}

fn recovered(sub: &Substructure, predicted: &ActionSequence) -> bool {
    targets(predicted).any(|t| {
        norm(&t.object) == norm(&sub.object)
            && match &sub.part {
                None => true,
                Some(p) => t.part.as_deref().map(norm).as_deref() == Some(norm(p).as_str()),
            }
    })
}

pub fn grade_sequence(predicted: Option<&ActionSequence>, gold: &ActionSequence, gold_substructures: &[Substructure]) -> Grade {
    let subs = expected_subs(gold, gold_substructures);
    let s_total = subs.len();
    let Some(pred) = predicted else {
        return Grade {
            r: 0,
            f_correct: 0,
            f_total: 1,
            s_correct: 0,
            s_total,
        };
    };
    let r = u8::from(pairs(pred) == pairs(gold));
    let pf = flatten_fields(pred);
    let gf = flatten_fields(gold);
    let f_correct = pf.iter().filter(|(k, v)| gf.get(*k) == Some(*v)).count();
    let s_correct = subs.iter().filter(|s| recovered(s, pred)).count();
    Grade {
        r,
        f_correct,
        f_total: pf.len().max(1),
        s_correct,
        s_total,
    }
}

/// Grades a raw reply; parse failures use the unparseable convention.
pub fn grade_raw(raw: &str, gold: &GoldRecord) -> InstructionRecord {
    let pred = parse_action_sequence(raw).ok();
    to_record(gold, grade_sequence(pred.as_ref(), &gold.expected_sequence, &gold.expected_substructures))
}

fn to_record(gold: &GoldRecord, g: Grade) -> InstructionRecord {
    InstructionRecord {
        instruction: gold.instruction.clone(),
        level: gold.level,
        r: g.r,
        f_correct: g.f_correct,
        f_total: g.f_total,
        s_correct: g.s_correct,
        s_total: g.s_total,
    }
}

/// Grades predictions matched to gold records by instruction text. Gold
/// records without a prediction grade as unparseable.
pub fn grade_all(gold: &[GoldRecord], predictions: &[Prediction]) -> Vec<InstructionRecord> {
    let by_instruction: HashMap<&str, &str> = predictions
        .iter()
        .map(|p| (p.instruction.as_str(), p.output.as_str()))
        .collect();
    gold.iter()
        .map(|g| grade_raw(by_instruction.get(g.instruction.as_str()).copied().unwrap_or(""), g))
        .collect()
}

/// Each gold sequence graded against itself.
pub fn grade_self(gold: &[GoldRecord]) -> Vec<InstructionRecord> {
    gold.iter()
        .map(|g| to_record(g, grade_sequence(Some(&g.expected_sequence), &g.expected_sequence, &g.expected_substructures)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(json: &str) -> ActionSequence {
        parse_action_sequence(json).unwrap()
    }

    const GOLD: &str = r#"{"task_description":"hand me the hammer","steps":[
        {"index":1,"action":"grasp","target":{"object":"hammer","part":"head"}},
        {"index":2,"action":"handover","target":{"object":"hammer"}}]}"#;

    #[test]
    fn identity_is_perfect() {
        let g = seq(GOLD);
        let subs = [Substructure {
            object: "hammer".into(),
            part: Some("head".into()),
        }];
        assert_eq!(
            grade_sequence(Some(&g), &g, &subs),
            Grade {
                r: 1,
                f_correct: 7,
                f_total: 7,
                s_correct: 1,
                s_total: 1
            }
        );
    }

    #[test]
    fn omitted_part_and_wrong_object() {
        let g = seq(GOLD);
        let no_part = seq(
            r#"{"task_description":"x","steps":[{"index":1,"action":"grasp","target":{"object":"hammer"}},
               {"index":2,"action":"handover","target":{"object":"Hammer"}}]}"#,
        );
        let grade = grade_sequence(Some(&no_part), &g, &[]);
        assert_eq!((grade.r, grade.s_correct, grade.s_total), (1, 0, 1));
        assert_eq!((grade.f_correct, grade.f_total), (6, 6));
        let wrong = seq(r#"{"task_description":"x","steps":[{"index":1,"action":"grasp","target":{"object":"pen"}}]}"#);
        assert_eq!(grade_sequence(Some(&wrong), &g, &[]).r, 0);
        assert_eq!(
            grade_sequence(None, &g, &[]),
            Grade {
                r: 0,
                f_correct: 0,
                f_total: 1,
                s_correct: 0,
                s_total: 1
            }
        );
    }
}
