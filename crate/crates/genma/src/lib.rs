//! Character-level sentiment classification for romanized code-mixed text,
//! built from first principles: a small reverse-mode autodiff engine, the
//! GenMA architecture (two Conv1D/max-pool stages → BiLSTM → self-attention →
//! softmax), a char-CNN baseline, a TF-IDF + linear-SVM baseline, macro-F1
//! evaluation, and attention visualization.
//!
//! The crate has no ML-framework dependencies; every kernel is implemented
//! and gradient-checked here. All training and inference paths are
//! deterministic under a fixed seed.

pub mod attnviz;
pub mod baselines;
pub mod corpus;
mod error;
pub mod fixture;
pub mod layers;
pub mod metrics;
pub mod models;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
