//! Batch harness for natural-language-inference experiments over clinical
//! trial reports.
//!
//! The pipeline: load CTRs and instance splits ([`corpus`]), compose prompts
//! from a variant library ([`prompt`]), generate and extract labels through a
//! pluggable backend ([`inference`]), grid-search prompt combinations
//! ([`search`]), build augmented training splits ([`augment`]) and score
//! predictions with intervention-aware metrics ([`metrics`]).

pub mod corpus;
pub mod prompt;
pub mod inference;
pub mod augment;
pub mod metrics;
pub mod search;
pub mod cli;
