//! Edit-based discrete diffusion over token sequences.
//!
//! Clean sequences are corrupted by sampled KEEP / DELETE / REPLACE / INSERT
//! edits; a tagger and a span generator learn to reverse one step at a time;
//! decoding runs the reverse process from an initial sequence with greedy,
//! beam, nucleus or two-dimensional beam search.

pub mod alignment;
pub mod chain;
pub mod corruption;
pub mod decoding;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod rng;
pub mod script;
pub mod tasks;
pub mod vocab;

pub use alignment::{edit_distance, min_edit_script, word_level_script, AlignmentCosts};
pub use chain::{ChainRecord, RevisionChain};
pub use corruption::{CorruptionConfig, Corruptor, TrainingExample};
pub use error::{Error, Result};
pub use script::{apply_script, invert_script, normalize_script, EditOp, EditScript, EditTag, TaggedEdits};
pub use vocab::{segment_words, TokenId, Vocab};
