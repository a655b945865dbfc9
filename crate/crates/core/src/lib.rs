//! Kernels for conditioning speech synthesis on language-model semantics.
//!
//! Final-layer hidden states of a language model become semantic tokens
//! (global vectors or full sequences) that are fused with the acoustic text
//! embeddings of a TTS encoder. The [`metrics`] module scores the resulting
//! speech with mel-cepstral distortion and character/word error rates.
//!
//! Everything here is `no_std` and only needs `alloc`; file formats, audio
//! decoding and the command-line front end live in the `semtok` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod dataset_filter;
mod error;
pub mod fusion;
pub mod linalg;
mod matrix;
pub mod metrics;
pub mod prompts;
pub mod strategies;

pub use error::{Error, Result};
pub use matrix::{HiddenStateMatrix, Matrix};
