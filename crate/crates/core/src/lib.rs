//! Syllable-alphabet BPE tokenization for Indonesian text.
//!
//! The pipeline: [`corpus`] normalizes and pre-tokenizes text, the
//! [`syllabifier`] splits words into syllables by maximal onset, the
//! [`alphabet`] keeps the top-k syllables plus single characters, [`bpe`]
//! learns merges over that alphabet, and [`tokenizer`] composes everything
//! into an encoder. [`metrics`] scores segmentations with unigram
//! cross-entropy and Rényi efficiency.

pub mod alphabet;
pub mod bpe;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod syllabifier;
pub mod tokenizer;

pub use alphabet::{build_alphabet, practical_segment, Alphabet, SegmentFrequencyTable, MARKER, UNK};
pub use bpe::{apply_merges, train_bpe, validate_merge_sequence, MergeRule, MergeSequence};
pub use corpus::{normalize, pre_tokenize, Corpus, NormalizationConfig, WordKind, WordUnit};
pub use error::{Error, Result};
pub use eval::{evaluate, EvalOptions, MetricsReport, Segmenter};
pub use metrics::{Smoothing, UnigramDistribution};
pub use syllabifier::{Origin, Segment, SyllableRuleSet};
pub use tokenizer::{train_tokenizer, Mode, TokenizerModel, TrainConfig};
