//! Vulnerability type identification for C/C++ functions: a TF-IDF,
//! chi-square and binary-relevance Gaussian naive Bayes baseline, plus
//! refinement of any model's predictions with distinguishing tokens mined
//! from syntactic code elements.

pub mod artifact;
pub mod classifier;
pub mod config;
pub mod corpus;
pub mod distinguish;
pub mod error;
pub mod features;
pub mod metrics;
pub mod pipeline;
pub mod refine;
pub mod synthetic;
pub mod syntax;

pub use error::{Error, Result};
