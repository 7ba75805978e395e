//! The runtime tokenizer: normalization, syllabification, alphabet fallback
//! and merges composed into one encode function, plus model persistence.
//!
//! Whitespace is never a token. The first unit of every word preceded by
//! whitespace (or the start of the text) gets a separate `▁` unit in front
//! of it, which merges may absorb (`▁` + `yang` → `▁yang`). Decoding turns
//! each marker back into a space.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alphabet::{build_alphabet, count_segments_in_words, Alphabet, SegmentFrequencyTable, MARKER, UNK};
use crate::bpe::{collect_word_types, train_bpe, validate_merge_sequence, MergePair, MergeSequence, MergeTable, WordTypes};
use crate::corpus::{count_word_units, normalize, pre_tokenize, NormalizationConfig, WordUnit};
use crate::error::{Error, Result};
use crate::syllabifier::{Origin, SyllableRuleSet};

pub const FORMAT_VERSION: u32 = 1;

/// Number of special tokens appended after the trained vocabulary.
pub const SPECIAL_COUNT: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Specials {
    pub unk: String,
    pub word_boundary: String,
}

impl Default for Specials {
    fn default() -> Self {
        Self {
            unk: UNK.to_string(),
            word_boundary: MARKER.to_string(),
        }
    }
}

/// Everything in a model file except the checksum, in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBody {
    pub format_version: u32,
    pub normalization: NormalizationConfig,
    pub rules: SyllableRuleSet,
    pub alphabet: Alphabet,
    pub merges: Vec<MergePair>,
    pub specials: Specials,
}

impl ModelBody {
    /// Hex SHA-256 of the compact JSON serialization.
    pub fn checksum(&self) -> String {
        let canonical = serde_json::to_string(self).expect("model body serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// On-disk model: the body followed by its checksum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(flatten)]
    pub body: ModelBody,
    pub sha256: String,
}

impl ModelFile {
    pub fn seal(body: ModelBody) -> Self {
        let sha256 = body.checksum();
        Self { body, sha256 }
    }

    /// Pretty-printed JSON, LF line endings, trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone)]
pub struct TokenizerModel {
    body: ModelBody,
    merges: MergeSequence,
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    table: MergeTable,
    unk_id: u32,
    marker_id: u32,
}

impl PartialEq for TokenizerModel {
    fn eq(&self, other: &Self) -> bool {
        self.body == other.body
    }
}

impl TokenizerModel {
    /// Assembles a model and assigns ids: alphabet units in serialization
    /// order, then merge results by rank, then UNK and the marker.
    pub fn new(
        normalization: NormalizationConfig,
        rules: SyllableRuleSet,
        alphabet: Alphabet,
        merges: MergeSequence,
    ) -> Result<Self> {
        validate_merge_sequence(&merges, &alphabet)?;
        let mut vocab: Vec<String> = Vec::new();
        let mut ids: HashMap<String, u32> = HashMap::new();
        let mut push = |text: String, vocab: &mut Vec<String>| {
            if !ids.contains_key(&text) {
                ids.insert(text.clone(), vocab.len() as u32);
                vocab.push(text);
            }
        };
        for unit in alphabet.units() {
            push(unit, &mut vocab);
        }
        for rule in merges.rules() {
            push(rule.result.clone(), &mut vocab);
        }
        let specials = Specials::default();
        let unk_id = vocab.len() as u32;
        vocab.push(specials.unk.clone());
        ids.insert(specials.unk.clone(), unk_id);
        let marker_id = vocab.len() as u32;
        vocab.push(specials.word_boundary.clone());
        ids.insert(specials.word_boundary.clone(), marker_id);

        let table = MergeTable::new(&ids, &merges)?;
        let body = ModelBody {
            format_version: FORMAT_VERSION,
            normalization,
            rules,
            alphabet,
            merges: merges.pairs(),
            specials,
        };
        Ok(Self {
            body,
            merges,
            vocab,
            ids,
            table,
            unk_id,
            marker_id,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.body.alphabet
    }

    pub fn rules(&self) -> &SyllableRuleSet {
        &self.body.rules
    }

    pub fn normalization(&self) -> &NormalizationConfig {
        &self.body.normalization
    }

    pub fn merges(&self) -> &MergeSequence {
        &self.merges
    }

    /// Total vocabulary size, specials included.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn unk_id(&self) -> u32 {
        self.unk_id
    }

    pub fn marker_id(&self) -> u32 {
        self.marker_id
    }

    pub fn token_text(&self, id: u32) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }

    pub fn token_id(&self, text: &str) -> Option<u32> {
        self.ids.get(text).copied()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        let norm = normalize(text, &self.body.normalization);
        let mut out = Vec::with_capacity(norm.len() / 3);
        let mut word = Vec::new();
        for unit in pre_tokenize(&norm) {
            self.encode_unit(&unit, &mut word);
            out.extend_from_slice(&word);
        }
        out
    }

    /// Token ids of one word unit, merges applied.
    pub fn encode_unit(&self, unit: &WordUnit, out: &mut Vec<u32>) {
        out.clear();
        if unit.word_initial {
            out.push(self.marker_id);
        }
        for seg in self.body.alphabet.segment_unit(unit, &self.body.rules) {
            let id = match seg.origin {
                Origin::Unknown => self.unk_id,
                _ => self.ids[&seg.text],
            };
            out.push(id);
        }
        self.table.apply(out);
    }

    pub fn encode_pieces(&self, text: &str) -> Vec<String> {
        self.encode(text)
            .into_iter()
            .map(|id| self.vocab[id as usize].clone())
            .collect()
    }

    /// Concatenates token texts, turning each marker into a space. The
    /// space produced by a marker at the very start is dropped. UNK renders
    /// as U+FFFD.
    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut out = String::new();
        for (position, &id) in ids.iter().enumerate() {
            let text = self.vocab.get(id as usize).ok_or(Error::IdOutOfRange {
                id,
                position,
                vocab_size: self.vocab.len(),
            })?;
            match text.strip_prefix(MARKER) {
                Some(rest) if id != self.unk_id => {
                    if position > 0 {
                        out.push(' ');
                    }
                    out.push_str(rest);
                }
                _ => out.push_str(text),
            }
        }
        Ok(out)
    }

    pub fn to_model_file(&self) -> ModelFile {
        ModelFile::seal(self.body.clone())
    }

    pub fn to_json(&self) -> String {
        self.to_model_file().to_json()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(json).map_err(|e| {
            if e.is_eof() {
                Error::Checksum(format!("model file is truncated ({e})"))
            } else {
                Error::ModelFormat(e.to_string())
            }
        })?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::VersionMismatch {
                    found: v as u32,
                    expected: FORMAT_VERSION,
                })
            }
            None => return Err(Error::ModelFormat("missing format_version".into())),
        }
        if value.get("sha256").is_none() {
            return Err(Error::Checksum("sha256 field missing".into()));
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let actual = file.body.checksum();
        if actual != file.sha256 {
            return Err(Error::Checksum(format!(
                "recorded {} but body hashes to {actual}",
                file.sha256
            )));
        }
        let body = file.body;
        let merges = MergeSequence::new(
            body.merges.iter().map(|MergePair(l, r)| (l.clone(), r.clone())),
            body.alphabet.hash(),
        );
        let model = Self::new(body.normalization, body.rules, body.alphabet, merges)?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Syllable alphabet (top-k syllables plus characters) as the base.
    Syllable,
    /// Characters only as the base.
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: Mode,
    pub k: usize,
    pub target_vocab: usize,
    pub normalization: NormalizationConfig,
    pub rules: SyllableRuleSet,
}

/// Numbers worth logging after training.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub mode: Mode,
    pub k: usize,
    pub syllable_units: usize,
    pub char_units: usize,
    pub alphabet_size: usize,
    pub merges: usize,
    pub vocab_size: usize,
    pub target_vocab: usize,
    pub rule_set_hash: String,
    /// Set when k exceeds the number of distinct multi-character segments.
    pub k_saturated: bool,
}

pub struct Trained {
    pub model: TokenizerModel,
    pub frequencies: SegmentFrequencyTable,
    pub summary: TrainSummary,
}

/// The unit sequence of each training word type, optionally preceded by
/// the boundary marker on word-initial units.
pub fn training_word_types(
    words: &[(WordUnit, u64)],
    alphabet: &Alphabet,
    rules: &SyllableRuleSet,
    markers: bool,
) -> WordTypes {
    use rayon::prelude::*;
    let marker = MARKER.to_string();
    let seqs: Vec<(Vec<String>, u64)> = words
        .par_iter()
        .map(|(unit, n)| {
            let mut units = Vec::new();
            if markers && unit.word_initial {
                units.push(marker.clone());
            }
            units.extend(
                alphabet
                    .segment_unit(unit, rules)
                    .into_iter()
                    .map(|s| s.text),
            );
            (units, *n)
        })
        .collect();
    collect_word_types(seqs)
}

/// Trains a complete tokenizer on raw documents.
pub fn train_tokenizer<S: AsRef<str> + Sync>(
    documents: &[S],
    config: &TrainConfig,
) -> Result<Trained> {
    use rayon::prelude::*;
    let normalized: Vec<String> = documents
        .par_iter()
        .map(|d| normalize(d.as_ref(), &config.normalization))
        .collect();
    let words = count_word_units(&normalized);
    let frequencies = count_segments_in_words(&words, &config.rules);
    let k = match config.mode {
        Mode::Syllable => config.k,
        Mode::Plain => 0,
    };
    let alphabet = build_alphabet(&frequencies, k);
    let types = training_word_types(&words, &alphabet, &config.rules, true);
    let merges = train_bpe(&types, &alphabet, config.target_vocab)?;
    let available = frequencies
        .counts()
        .keys()
        .filter(|s| s.chars().nth(1).is_some())
        .count();
    let summary = TrainSummary {
        mode: config.mode,
        k,
        syllable_units: alphabet.syllable_units().len(),
        char_units: alphabet.char_units().len(),
        alphabet_size: alphabet.len(),
        merges: merges.len(),
        vocab_size: 0,
        target_vocab: config.target_vocab,
        rule_set_hash: config.rules.hash(),
        k_saturated: k > available,
    };
    let model = TokenizerModel::new(
        config.normalization.clone(),
        config.rules.clone(),
        alphabet,
        merges,
    )?;
    let summary = TrainSummary {
        vocab_size: model.vocab_size(),
        ..summary
    };
    Ok(Trained {
        model,
        frequencies,
        summary,
    })
}
