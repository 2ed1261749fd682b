//! One-vs-rest linear SVMs over video-level vectors, scored by mean average precision.

mod metrics;
mod svm;

pub use metrics::{average_precision, evaluate, format_map_table, EvalReport};
pub use svm::{predict, predict_scores, train_svm, SvmModel, SvmParams};
