//! Instruction metrics and the localization ablation.

pub mod ablation;
mod grade;
mod metrics;

pub use ablation::{
    generate_suite, load_suite, run_ablation, save_suite, AblationConfig, AblationReport, AblationResult,
    AblationScene, Outcome, StrategySummary,
};
pub use grade::{
    flatten_fields, gold_to_json, grade_all, grade_raw, grade_self, grade_sequence, load_gold, load_predictions,
    parse_gold, Grade, GoldRecord, Prediction, Substructure,
};
pub use metrics::{compute_ig, compute_so, compute_su, InstructionRecord, LevelMetrics, MetricError, MetricsReport};
