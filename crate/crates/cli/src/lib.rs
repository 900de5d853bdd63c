//! Command implementations and the HTTP service behind the `guirepro` binary.

pub mod commands;
pub mod service;
