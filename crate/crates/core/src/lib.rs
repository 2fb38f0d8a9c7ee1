pub mod cli;
pub mod error;
pub mod features;
pub mod hmm;
pub mod ingest;
pub mod learners;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod policy;
pub mod preprocess;
pub mod qlearn;
pub mod report;
pub mod seed;
pub mod synthgen;
pub mod tuning;

pub use error::{Error, Result};
