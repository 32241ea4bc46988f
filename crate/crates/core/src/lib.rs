//! Partition chains, log-ratio profiles, ultrametric and Euclidean
//! embeddings of finite metric spaces.

pub mod bounds;
pub mod chain;
pub mod dimension;
pub mod embed;
pub mod enumerate;
pub mod error;
pub mod gaps;
pub mod io;
pub mod logratio;
pub mod metric;
pub mod partition;
pub mod ultrametric;
pub mod zoo;

pub use error::{Error, Result, Violation};
pub use metric::{default_labels, FiniteMetricSpace, ValidateOptions};
