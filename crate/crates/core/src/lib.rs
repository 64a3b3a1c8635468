//! Gradient-free recommendation toolkit.
//!
//! The pipeline turns Amazon-style review dumps into labeled examples
//! ([`ingest`]), extracts TF-IDF text features ([`tfidf`]) and user/item
//! graph embeddings ([`graph`]), concatenates them ([`features`]), and feeds a
//! from-scratch Bi-LSTM classifier ([`bilstm`]) whose flattened parameters are
//! searched by the Passer Learning metaheuristic ([`optim`]). [`eval`] runs the
//! training-fraction × budget experiment grid and writes long-format reports.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the `f64` instantiation used by the command-line tool.

pub mod bilstm;
pub mod error;
pub mod eval;
pub mod features;
pub mod fmt;
pub mod graph;
pub mod ingest;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod tfidf;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type FeatureVector = tfidf::FeatureVector<f64>;
pub type TfidfModel = tfidf::TfidfModel<f64>;
pub type EmbeddingTable = graph::EmbeddingTable<f64>;
pub type PpmiMatrix = graph::SymMatrix<f64>;
pub type FeaturePipeline = features::FeaturePipeline<f64>;
pub type PLConfig = optim::PLConfig<f64>;
pub type Bounds = optim::Bounds<f64>;
pub type OptimizationResult = optim::OptimizationResult<f64>;
pub type BiLstmModel = bilstm::BiLstmModel<f64>;
pub type ParamVector = bilstm::ParamVector<f64>;
pub type MetricReport = eval::MetricReport<f64>;
