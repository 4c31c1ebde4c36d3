//! Metrics, the cross-validation pipeline, and report tables built from
//! per-row prediction logs.

mod log;
mod metrics;
mod pipeline;
mod report;

pub use log::PredictionRecord;
pub use metrics::{
    anomaly_detection_rate, average_precision, best_f1_threshold, confusion_metrics, decision_metrics, f1_score,
    median, roc_auc, ConfusionCounts, ConfusionMetrics, Summary,
};
pub use pipeline::{
    fit_full, fit_model, predict_records, prepare, run_fold, score_rows, score_table, ExpertSizes, FitAudit,
    FitOutcome, FittedModel, FoldResult, PipelineSettings, PreparedData, RowScores, TrainingReports,
};
pub use report::{
    ablation_table, build_report, complementarity, detection_rates, entropy_comparison, summarize,
    transaction_type_table, AblationRow, ComplementCase, Complementarity, EntropyComparison, GroupMetrics,
    MetricsReport, ModelSummary, VariantRow, MAX_EXEMPLARS,
};
