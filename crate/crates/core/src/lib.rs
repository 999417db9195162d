//! Automated repair of single-file C programs.
//!
//! The pipeline compiles a candidate with gcov instrumentation, runs it
//! against a test suite, ranks suspicious lines from the per-test coverage
//! spectrum and asks a language model for a corrected program, repeating
//! until every test passes or the iteration budget runs out.

pub mod agent;
pub mod bench;
pub mod error;
pub mod harness;
pub mod prompt;
pub mod provider;
pub mod scenario;
pub mod spectrum;

pub use error::{Error, Result};
pub use scenario::Scenario;
