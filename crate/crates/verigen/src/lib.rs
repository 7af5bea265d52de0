//! Pipeline for generating formally verified C functions.
//!
//! A problem bundle (natural-language spec, ACSL spec, function signature,
//! unit tests) is turned into a verified C function by sampling candidate
//! programs from a chat-completion model and iteratively repairing the most
//! promising candidate with compiler and verifier feedback. A candidate is
//! accepted only when Frama-C proves every WP and RTE goal.
//!
//! The main entry points are [`bundle::load_bundle`], [`engine::run_session`]
//! and the `verigen` binary built from this crate.

pub mod bench;
pub mod bundle;
pub mod cli;
pub mod compile;
pub mod engine;
pub mod harness;
pub mod llm;
pub mod pool;
pub mod prompt;
pub mod scalar;
pub mod signature;
pub mod transform;
pub mod verify;
pub mod workspace;
