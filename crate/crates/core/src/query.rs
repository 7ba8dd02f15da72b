use std::fmt;

use serde::{Deserialize, Serialize};

/// An (object, optional part) descriptor with free-form features.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TargetQuery {
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part: Option<String>,
    #[serde(default)]
    pub features: Vec<String>,
}

impl TargetQuery {
    pub fn object(name: impl Into<String>) -> Self {
        Self {
            object: name.into(),
            part: None,
            features: Vec::new(),
        }
    }

    pub fn part(object: impl Into<String>, part: impl Into<String>) -> Self {
        Self {
            object: object.into(),
            part: Some(part.into()),
            features: Vec::new(),
        }
    }

    /// Case-insensitive match against a labeled (object, part) pair.
    /// A query without a part matches every part of the object.
    pub fn matches(&self, object: &str, part: &str) -> bool {
        self.object.trim().eq_ignore_ascii_case(object)
            && self
                .part
                .as_deref()
                .is_none_or(|p| p.trim().eq_ignore_ascii_case(part))
    }
}

impl fmt::Display for TargetQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.part {
            Some(p) => write!(f, "{}/{}", self.object, p),
            None => write!(f, "{}", self.object),
        }
    }
}
