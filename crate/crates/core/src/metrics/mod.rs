//! Objective evaluation of synthesized speech.
//!
//! [`mel`] turns PCM samples into mel-cepstra, [`dtw`] aligns two cepstral
//! sequences, [`mcd`] measures their distortion in dB, [`edit`] scores ASR
//! transcripts and [`summary`] aggregates per-utterance values.

pub mod dtw;
pub mod edit;
pub mod mcd;
pub mod mel;
pub mod summary;

pub use dtw::{dtw_align, DtwAlignment};
pub use edit::{cer, char_edit_stats, edit_stats, wer, word_edit_stats, EditStats, TextNormalizer};
pub use mcd::{frame_distortion, mcd, McdOptions, MCD_SCALE};
pub use mel::{mel_cepstra_from_audio, MelAnalyzer, MelCepstra, MelConfig};
pub use summary::{format_mean_std, MeanStd};
