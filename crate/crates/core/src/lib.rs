//! Event-flow modeling of GUI apps and auto-completed bug reports.
//!
//! The analysis side loads an app bundle ([`app_sim`]), extracts its static
//! component universe ([`primer`]), rips it into an event-flow graph
//! ([`engine`]) and persists everything ([`model_db`]). The reporting side
//! walks that model to suggest reproduction steps ([`autocomplete`]) and
//! produces replayable reports ([`report`]).

pub mod app_sim;
pub mod autocomplete;
pub mod engine;
pub mod model_db;
pub mod par;
pub mod primer;
pub mod report;

pub use par::Execution;
