//! Prediction heads, losses, metrics, dataset splits and the training loop.

pub mod head;
pub mod metrics;
pub mod split;
pub mod trainer;

pub use head::{apply_head, HeadQuery, HeadSpec};
pub use metrics::{
    best_f1, classification_metrics, f1, multiclass_accuracy, pr_curve, pr_curve_csv, rmse,
    roc_auc, MetricsReport, PrPoint,
};
pub use split::{make_split, part_sizes, Split, SplitMode};
pub use trainer::{train, Batch, EpochRecord, History, Target, TrainConfig};
