//! Rule-based Indonesian syllable segmentation.
//!
//! Words are scanned into consonant and vowel units, with the digraphs
//! `ng`, `ny`, `kh` and `sy` folded into single consonant units. Every vowel
//! is a nucleus. Consonants between two nuclei go to the following syllable
//! up to the longest legal onset (a single consonant is always legal,
//! clusters only when listed); the rest close the preceding syllable.
//! Leading consonants join the first syllable and trailing consonants the
//! last one.
//!
//! ```
//! use sukukata::syllabifier::SyllableRuleSet;
//! let rules = SyllableRuleSet::default();
//! assert_eq!(rules.split("mengambil"), ["me", "ngam", "bil"]);
//! assert_eq!(rules.split("struktur"), ["struk", "tur"]);
//! ```

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{pre_tokenize, WordKind, WordUnit};
use crate::error::{Error, Result};

/// Vowel pairs that form one nucleus at the end of a word when
/// `diphthongs_enabled` is set.
pub const DIPHTHONGS: [&str; 3] = ["ai", "au", "oi"];

const DEFAULT_DIGRAPHS: [&str; 4] = ["ng", "ny", "kh", "sy"];
const DEFAULT_ONSETS: [&str; 20] = [
    "pr", "br", "tr", "dr", "kr", "gr", "pl", "bl", "kl", "gl", "fl", "fr", "sl", "sp", "st", "sk",
    "sw", "str", "spr", "skr",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRuleSet")]
pub struct SyllableRuleSet {
    vowels: BTreeSet<char>,
    digraphs: BTreeSet<String>,
    onset_clusters: BTreeSet<String>,
    diphthongs_enabled: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRuleSet {
    vowels: BTreeSet<char>,
    digraphs: BTreeSet<String>,
    onset_clusters: BTreeSet<String>,
    diphthongs_enabled: bool,
}

impl TryFrom<RawRuleSet> for SyllableRuleSet {
    type Error = Error;

    fn try_from(raw: RawRuleSet) -> Result<Self> {
        SyllableRuleSet::new(
            raw.vowels,
            raw.digraphs,
            raw.onset_clusters,
            raw.diphthongs_enabled,
        )
    }
}

impl Default for SyllableRuleSet {
    fn default() -> Self {
        Self {
            vowels: "aeiou".chars().collect(),
            digraphs: DEFAULT_DIGRAPHS.iter().map(|s| s.to_string()).collect(),
            onset_clusters: DEFAULT_ONSETS.iter().map(|s| s.to_string()).collect(),
            diphthongs_enabled: false,
        }
    }
}

impl SyllableRuleSet {
    pub fn new(
        vowels: BTreeSet<char>,
        digraphs: BTreeSet<String>,
        onset_clusters: BTreeSet<String>,
        diphthongs_enabled: bool,
    ) -> Result<Self> {
        if vowels.is_empty() {
            return Err(Error::InvalidRules("vowel set is empty".into()));
        }
        let lower = |s: &str| s.chars().all(|c| !c.is_uppercase());
        if !vowels.iter().all(|v| !v.is_uppercase()) {
            return Err(Error::InvalidRules("vowels must be lowercase".into()));
        }
        for d in &digraphs {
            if d.chars().count() != 2 || !lower(d) {
                return Err(Error::InvalidRules(format!(
                    "digraph {d:?} must be two lowercase characters"
                )));
            }
            if d.chars().any(|ch| vowels.contains(&ch)) {
                return Err(Error::InvalidRules(format!("digraph {d:?} contains a vowel")));
            }
        }
        for c in &onset_clusters {
            let n = c.chars().count();
            if !(2..=3).contains(&n) || !lower(c) {
                return Err(Error::InvalidRules(format!(
                    "onset cluster {c:?} must be two or three lowercase characters"
                )));
            }
            if c.chars().any(|ch| vowels.contains(&ch)) {
                return Err(Error::InvalidRules(format!(
                    "onset cluster {c:?} contains a vowel"
                )));
            }
        }
        Ok(Self {
            vowels,
            digraphs,
            onset_clusters,
            diphthongs_enabled,
        })
    }

    pub fn with_diphthongs(mut self, enabled: bool) -> Self {
        self.diphthongs_enabled = enabled;
        self
    }

    pub fn diphthongs_enabled(&self) -> bool {
        self.diphthongs_enabled
    }

    pub fn is_vowel(&self, c: char) -> bool {
        self.vowels.contains(&fold(c))
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::InvalidRules(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("rule set serializes")
    }

    /// Hex SHA-256 of the compact JSON form. Reports carry it so every
    /// number can be traced back to the rules that produced it.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// Splits `word` into syllable slices. A word with no vowel comes back
    /// whole. Empty input yields no slices.
    pub fn split<'w>(&self, word: &'w str) -> Vec<&'w str> {
        if word.is_empty() {
            return Vec::new();
        }
        let units = self.scan(word);
        let nuclei = self.nuclei(word, &units);
        if nuclei.is_empty() {
            return vec![word];
        }

        let mut starts = Vec::with_capacity(nuclei.len());
        starts.push(0);
        for pair in nuclei.windows(2) {
            let (prev_end, next_start) = (pair[0].1, pair[1].0);
            let onset = self.onset_len(word, &units[prev_end..next_start]);
            starts.push(units[next_start - onset].start);
        }
        let mut out = Vec::with_capacity(starts.len());
        for (i, &s) in starts.iter().enumerate() {
            let e = starts.get(i + 1).copied().unwrap_or(word.len());
            out.push(&word[s..e]);
        }
        out
    }

    /// [`split`](Self::split) wrapped as segments. Vowel-less words become a
    /// single fallback segment.
    pub fn syllabify_word(&self, word: &str) -> Vec<Segment> {
        let parts = self.split(word);
        let fallback = parts.len() == 1 && !parts[0].chars().any(|c| self.is_vowel(c));
        parts
            .into_iter()
            .map(|p| Segment {
                text: p.to_owned(),
                origin: if fallback {
                    Origin::Fallback
                } else {
                    Origin::Syllable
                },
                word_initial: false,
            })
            .collect()
    }

    /// Segments of one word unit: syllables for alphabetic words, one
    /// fallback segment per character otherwise.
    pub fn segment_unit(&self, unit: &WordUnit) -> Vec<Segment> {
        let mut segs = if unit.kind == WordKind::Alphabetic {
            self.syllabify_word(&unit.text)
        } else {
            unit.text
                .chars()
                .map(|c| Segment::fallback(c.to_string()))
                .collect()
        };
        if let Some(first) = segs.first_mut() {
            first.word_initial = unit.word_initial;
        }
        segs
    }

    fn scan(&self, word: &str) -> Vec<Unit> {
        let mut units = Vec::with_capacity(word.len());
        let mut chars = word.char_indices().peekable();
        while let Some((start, c)) = chars.next() {
            let vowel = self.is_vowel(c);
            let mut end = start + c.len_utf8();
            if !vowel {
                if let Some(&(_, next)) = chars.peek() {
                    if self.is_digraph(c, next) {
                        end += next.len_utf8();
                        chars.next();
                    }
                }
            }
            units.push(Unit { start, end, vowel });
        }
        units
    }

    fn is_digraph(&self, a: char, b: char) -> bool {
        let mut buf = [0u8; 8];
        let a = fold(a).encode_utf8(&mut buf).len();
        let b = fold(b).encode_utf8(&mut buf[a..]).len();
        std::str::from_utf8(&buf[..a + b])
            .map(|s| self.digraphs.contains(s))
            .unwrap_or(false)
    }

    /// Nucleus unit ranges, half-open.
    fn nuclei(&self, word: &str, units: &[Unit]) -> Vec<(usize, usize)> {
        let mut nuclei: Vec<(usize, usize)> = units
            .iter()
            .enumerate()
            .filter(|(_, u)| u.vowel)
            .map(|(i, _)| (i, i + 1))
            .collect();
        let n = nuclei.len();
        if self.diphthongs_enabled && n >= 2 {
            let (prev, last) = (nuclei[n - 2], nuclei[n - 1]);
            if last.0 == units.len() - 1 && prev.1 == last.0 {
                let pair: String = word[units[prev.0].start..units[last.0].end]
                    .chars()
                    .map(fold)
                    .collect();
                if DIPHTHONGS.contains(&pair.as_str()) {
                    nuclei.pop();
                    nuclei[n - 2].1 = last.1;
                }
            }
        }
        nuclei
    }

    fn onset_len(&self, word: &str, run: &[Unit]) -> usize {
        for len in (1..=run.len().min(3)).rev() {
            if len == 1 {
                return 1;
            }
            let tail = &run[run.len() - len..];
            let text: String = word[tail[0].start..tail[len - 1].end]
                .chars()
                .map(fold)
                .collect();
            if self.onset_clusters.contains(&text) {
                return len;
            }
        }
        0
    }
}

fn fold(c: char) -> char {
    if c.is_ascii() {
        return c.to_ascii_lowercase();
    }
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

#[derive(Debug, Clone, Copy)]
struct Unit {
    start: usize,
    end: usize,
    vowel: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    /// Produced by the syllable rules.
    Syllable,
    /// Produced by per-character decomposition, or a vowel-less word kept
    /// whole.
    Fallback,
    /// A character outside the alphabet; encodes as the UNK token.
    Unknown,
}

/// A syllable or single character produced by segmentation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segment {
    pub text: String,
    pub origin: Origin,
    /// Set on the first segment of a word preceded by whitespace or the
    /// start of the document.
    pub word_initial: bool,
}

impl Segment {
    pub fn syllable(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            origin: Origin::Syllable,
            word_initial: false,
        }
    }

    pub fn fallback(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            origin: Origin::Fallback,
            word_initial: false,
        }
    }

    pub fn is_fallback(&self) -> bool {
        self.origin != Origin::Syllable
    }
}

/// Segments normalized text: pre-tokenization, then syllables for
/// alphabetic words and single characters for everything else.
pub fn segment_text(text: &str, rules: &SyllableRuleSet) -> Vec<Segment> {
    pre_tokenize(text)
        .iter()
        .flat_map(|u| rules.segment_unit(u))
        .collect()
}
