//! Command line and HTTP front end over `webenv-core`.

pub mod cli;
pub mod config;
pub mod ops;
pub mod service;
