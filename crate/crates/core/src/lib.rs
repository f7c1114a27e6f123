//! Verifiable synthetic web environments for training web agents.
//!
//! - [`judge`]: rule-based judges and their deterministic evaluation.
//! - [`site`]: the built-in seeded reference website.
//! - [`lifecycle`]: environment registry, start/reset/health and state digests.
//! - [`tasks`]: task records, validation plans and judge instantiation.
//! - [`rollout`]: episodes, rewards and rejection-filtered datasets.

pub mod canonical;
pub mod env;
pub mod judge;
pub mod lifecycle;
pub mod rng;
pub mod rollout;
pub mod site;
pub mod tasks;
