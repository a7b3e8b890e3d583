pub mod config;
pub mod corpus;
pub mod eda;
pub mod error;
pub mod eval;
pub mod filters;
pub mod metrics;
pub mod prompts;
pub mod tree;
pub mod variants;

pub use error::{Error, Result};
