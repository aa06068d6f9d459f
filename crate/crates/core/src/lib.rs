//! Hierarchical Bengali question classification toolkit.
//!
//! A two-stage classifier: stage one encodes a question with in-house
//! skip-gram word2vec embeddings and routes it to a coarse class with a
//! 1D CNN; stage two picks the finer class with that coarse class's own
//! linear model over bigram TF-IDF features. Training-set imbalance is
//! corrected with SMOTE oversampling in the flattened encoding space,
//! applied to training splits only.
//!
//! All randomness flows from one seed through named substreams, so
//! models, predictions, and evaluation reports reproduce byte for byte.

pub mod balance;
pub mod cnn;
pub mod config;
pub mod container;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod sgd_linear;
pub mod synthetic;
pub mod tfidf;

pub use config::PipelineConfig;
pub use corpus::{CoarseId, FinerId, QuestionSample, Taxonomy};
pub use error::{Error, Result};
pub use eval::{cross_validate, CvReport};
pub use pipeline::{
    classify, load_pipeline, save_pipeline, train_pipeline, Classification, PipelineModel,
};
