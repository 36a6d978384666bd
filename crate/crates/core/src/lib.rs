//! Oracle-gap mutation analysis.
//!
//! Measures how far a test suite's code coverage outruns its ability to
//! detect injected faults. For each file the tool reports line coverage,
//! mutation score (raw and restricted to covered lines) and the two gaps
//! between them, then ranks files and flags the suspicious ones.
//!
//! The pipeline is staged through files so long campaigns can resume:
//!
//! 1. [`operators`] and [`sampling`] produce a mutant list,
//! 2. [`executor`] evaluates each mutant in an isolated workspace,
//! 3. [`metrics`] and [`report`] turn outcomes plus [`coverage`] into gaps,
//! 4. [`stats`] and [`ablation`] support corpus-level and knockout studies.

pub mod ablation;
pub mod cli;
pub mod config;
pub mod coverage;
pub mod error;
pub mod executor;
pub mod fixtures;
pub mod io;
pub mod metrics;
pub mod operators;
pub mod report;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
