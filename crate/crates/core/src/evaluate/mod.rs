//! Downstream benchmarks for embeddings: link prediction and multi-label node
//! classification.

pub mod classify;
pub mod linkpred;

pub use classify::{node_classification, ClassificationReport, ClassifyConfig, LabelSet};
pub use linkpred::{lp_precision, lp_split, similarity, LinkPredSplit, Similarity};
