//! Core algorithms for summarizing mobile UI screens.
//!
//! Everything in this crate is pure computation over in-memory data and runs
//! without `std` (only `alloc` is required). File formats, dataset loading and
//! the command-line front end live in the `uisum` crate.
//!
//! The pipeline, roughly in dependency order:
//!
//! - [`tree`] and [`corpus`]: view-hierarchy trees, annotated screens and
//!   app-wise dataset splits.
//! - [`text`] and [`vocab`]: tokenization, decoding vocabulary and pooled
//!   word-vector embeddings.
//! - [`features`]: turns a screen into per-element model inputs.
//! - [`autograd`], [`nn`], [`model`], [`optim`], [`train`]: a small reverse-mode
//!   autodiff engine and the dual-encoder/decoder summarization network built
//!   on top of it.
//! - [`decode`]: beam search and prediction post-processing.
//! - [`baselines`]: nearest-neighbour template retrieval.
//! - [`metrics`]: BLEU, ROUGE-L, CIDEr and METEOR-lite.
//! - [`analysis`]: annotator agreement and summary statistics.
#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod analysis;
pub mod autograd;
pub mod baselines;
pub mod corpus;
pub mod decode;
mod error;
pub mod features;
pub mod image;
pub mod math;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod tensor;
pub mod text;
pub mod train;
pub mod tree;
pub mod vocab;

pub use error::{Error, Result};
