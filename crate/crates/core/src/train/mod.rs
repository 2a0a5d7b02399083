//! Optimizers, the training loop, evaluation metrics, ROC curves, the
//! training-time benchmark and finite-difference gradient checks.

mod bench;
pub mod gradcheck;
mod metrics;
mod optim;
mod roc;
mod trainer;

pub use bench::{
    benchmark, benchmark_qrnn_vs_lstm, median, reference_ratios, validate_arms, ArmReport,
    BenchConfig, BenchReport, ReferenceRatio,
};
pub use metrics::{
    metrics_from_confusion, AveragedMetrics, Averaging, BinaryCounts, ClassMetrics,
    ConfusionMatrix, MetricsReport,
};
pub use optim::{Optimizer, OptimizerKind};
pub use roc::{roc_auc, roc_points, write_roc_csv, RocCurve, RocPoint};
pub use trainer::{evaluate, train, train_with, EpochStats, Evaluation, TrainConfig, TrainReport};
