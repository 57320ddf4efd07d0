//! Dataset loading, file formats and pipeline steps on top of `uisum-core`.

pub use uisum_core as core;

pub mod codec;
pub mod config;
pub mod dataset;
mod error;
pub mod formats;
pub mod hierarchy;
pub mod pipeline;
pub mod reports;

pub use error::{Error, Result};
