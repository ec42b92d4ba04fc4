//! Command-line and HTTP front ends for the auditing engine. Both share
//! the [`workspace::Workspace`] registry and the engine's serialization,
//! so the same configuration yields byte-identical artifacts.

pub mod cli;
pub mod error;
pub mod service;
pub mod workspace;

pub use error::{AppError, AppResult};
