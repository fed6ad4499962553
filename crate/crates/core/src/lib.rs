//! Corpus engineering toolkit for machine-translation data pipelines.
//!
//! The crate covers the data side of an MT training recipe, everything up to
//! (but not including) neural model training:
//!
//! - [`corpus`] — record types, deterministic corpus I/O, manifests, sharding,
//!   shuffling.
//! - [`textnorm`] — punctuation normalization, placeholder masking,
//!   tokenization, truecasing.
//! - [`filters`] — heuristic parallel-data filtering (corruption, length,
//!   letter ratio, language id, content overlap) plus exact deduplication.
//! - [`lm`] — interpolated modified Kneser–Ney n-gram language models with
//!   ARPA import/export, used for cross-entropy scoring.
//! - [`select`] — dual conditional cross-entropy scoring of sentence pairs,
//!   cross-entropy-difference selection of monolingual data, and
//!   bitext/synthetic mixture construction.
//! - [`segaug`] — byte-pair encoding with optional morpheme-boundary
//!   constraints, and unknown-token synthetic data generation.
//! - [`rerank`] — n-best list re-ranking with right-to-left model scores.
//! - [`optim`] — a desk-scale Adam/QHAdam comparison bench with the
//!   warm-up + inverse-sqrt learning-rate schedule.
//!
//! All operations are deterministic: output bytes are a pure function of
//! input bytes, configuration and seed, independent of thread count.

pub mod corpus;
pub mod filters;
pub mod lm;
pub mod optim;
pub mod rerank;
pub mod segaug;
pub mod select;
pub mod textnorm;
