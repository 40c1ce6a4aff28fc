//! Gender-debiased career recommendation engine.
//!
//! The pipeline learns user embeddings from interest "likes" with a small
//! neural collaborative filtering model, removes the gender direction from
//! those embeddings by orthogonal projection, and maps the result to ranked
//! academic concentrations with a multinomial logistic regression.
//!
//! Module map:
//!
//! - [`dataset`] - JSONL ingest, filtering, user-level splits, negative sampling, synthetic corpora
//! - [`ncf`] - two-pathway NCF training, fold-in for unseen users, gradient checking
//! - [`debias`] - bias direction and projection
//! - [`classifier`] - multinomial logistic regression trained with SAG
//! - [`pipeline`] - gender-aware / gender-debiased system variants and serving
//! - [`artifact`] - versioned JSON model container
//! - [`fairmetrics`] - NDCG@K, non-parity unfairness and the comparison harness
//! - [`interests`] - LDA over like-documents and questionnaire construction
//! - [`study`] - survey schema, scoring rules, Welch t-test, OLS/GLM analysis
//! - [`service`] - JSON-over-HTTP survey backend
//! - [`cli`] - the `careerrec` command line

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod classifier;
pub mod cli;
pub mod dataset;
pub mod debias;
pub mod error;
pub mod fairmetrics;
pub mod interests;
pub mod linalg;
pub mod ncf;
pub mod pipeline;
pub mod service;
pub mod study;

pub use error::{Error, Result};
