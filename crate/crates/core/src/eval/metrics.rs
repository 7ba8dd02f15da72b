use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::InstructionLevel;

/// Graded instruction: semantic score `r`, field counts, substructure counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub instruction: String,
    pub level: InstructionLevel,
    pub r: u8,
    pub f_correct: usize,
    pub f_total: usize,
    pub s_correct: usize,
    pub s_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("metric undefined on an empty record set")]
    Empty,
    #[error("record {index} has a zero denominator")]
    ZeroTotal { index: usize },
}

fn mean_ratio<'a>(
    records: impl ExactSizeIterator<Item = &'a InstructionRecord>,
    ratio: impl Fn(&InstructionRecord) -> (usize, usize),
) -> Result<f64, MetricError> {
    let n = records.len();
    if n == 0 {
        return Err(MetricError::Empty);
    }
    let mut sum = 0.0;
    for (index, r) in records.enumerate() {
        let (num, den) = ratio(r);
        if den == 0 {
            return Err(MetricError::ZeroTotal { index });
        }
        sum += num as f64 / den as f64;
    }
    Ok(sum / n as f64)
}

/// Mean semantic correctness `(1/N) Σ R_i`.
pub fn compute_su(records: &[InstructionRecord]) -> Result<f64, MetricError> {
    mean_ratio(records.iter(), |r| (r.r as usize, 1))
}

/// Mean fraction of correctly generated fields.
pub fn compute_so(records: &[InstructionRecord]) -> Result<f64, MetricError> {
    mean_ratio(records.iter(), |r| (r.f_correct, r.f_total))
}

/// Mean fraction of recovered target substructures.
pub fn compute_ig(records: &[InstructionRecord]) -> Result<f64, MetricError> {
    mean_ratio(records.iter(), |r| (r.s_correct, r.s_total))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub n: usize,
    pub su: f64,
    pub so: f64,
    pub ig: f64,
    /// Unweighted mean of `su`, `so` and `ig`.
    pub overall: f64,
}

impl LevelMetrics {
    pub fn compute(records: &[InstructionRecord]) -> Result<Self, MetricError> {
        let su = compute_su(records)?;
        let so = compute_so(records)?;
        let ig = compute_ig(records)?;
        Ok(Self {
            n: records.len(),
            su,
            so,
            ig,
            overall: (su + so + ig) / 3.0,
        })
    }
}

/// Per-level metrics plus the pooled set. Levels without records are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub levels: BTreeMap<InstructionLevel, LevelMetrics>,
    pub all: LevelMetrics,
}

impl MetricsReport {
    pub fn compute(records: &[InstructionRecord]) -> Result<Self, MetricError> {
        let mut levels = BTreeMap::new();
        for level in InstructionLevel::ALL {
            let subset: Vec<InstructionRecord> = records.iter().filter(|r| r.level == level).cloned().collect();
            if !subset.is_empty() {
                levels.insert(level, LevelMetrics::compute(&subset)?);
            }
        }
        Ok(Self {
            levels,
            all: LevelMetrics::compute(records)?,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>4} {:>7} {:>7} {:>7} {:>8}", "level", "N", "SU", "SO", "IG", "Overall");
        let mut row = |name: &str, m: &LevelMetrics| {
            let _ = writeln!(
                s,
                "{:<10} {:>4} {:>6.1}% {:>6.1}% {:>6.1}% {:>7.1}%",
                name,
                m.n,
                100.0 * m.su,
                100.0 * m.so,
                100.0 * m.ig,
                100.0 * m.overall
            );
        };
        for (level, m) in &self.levels {
            row(level.as_str(), m);
        }
        row("all", &self.all);
        s
    }
}
