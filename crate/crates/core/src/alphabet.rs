//! Syllable frequency estimation, top-k alphabet selection and the
//! character fallback that turns raw syllabification into a segmentation
//! over the alphabet.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{count_word_units, merge_counts, WordUnit};
use crate::error::{Error, Result};
use crate::syllabifier::{segment_text, Origin, Segment, SyllableRuleSet};

/// Reserved word-boundary marker (U+2581). Never part of the alphabet.
pub const MARKER: char = '\u{2581}';

/// Text of the UNK token (U+FFFD). Reserved like the marker, so no
/// vocabulary entry can collide with it.
pub const UNK: char = '\u{FFFD}';

fn is_reserved(c: char) -> bool {
    c == MARKER || c == UNK || c.is_whitespace()
}

/// Segment occurrence counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SegmentFrequencyTable {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl SegmentFrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, segment: &str, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry(segment.to_owned()).or_default() += n;
        self.total += n;
    }

    /// Adds another shard's counts. Associative and commutative.
    pub fn merge(&mut self, other: &SegmentFrequencyTable) {
        for (seg, &n) in &other.counts {
            self.add(seg, n);
        }
    }

    pub fn get(&self, segment: &str) -> u64 {
        self.counts.get(segment).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    /// Entries by count descending, then text ascending.
    pub fn ranked(&self) -> Vec<(&str, u64)> {
        let mut entries: Vec<_> = self.counts.iter().map(|(s, &n)| (s.as_str(), n)).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        entries
    }

    /// `segment<TAB>count` lines in ranked order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (seg, n) in self.ranked() {
            out.push_str(seg);
            out.push('\t');
            out.push_str(&n.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(tsv: &str) -> Result<Self> {
        let mut table = Self::new();
        for (i, line) in tsv.lines().enumerate() {
            let (seg, n) = line
                .split_once('\t')
                .ok_or_else(|| Error::InvalidArgument(format!("line {}: missing tab", i + 1)))?;
            let n: u64 = n
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("line {}: bad count {n:?}", i + 1)))?;
            table.add(seg, n);
        }
        Ok(table)
    }
}

/// Counts the syllable segmentation of every normalized document.
pub fn count_segments<S: AsRef<str> + Sync>(
    documents: &[S],
    rules: &SyllableRuleSet,
) -> SegmentFrequencyTable {
    count_segments_in_words(&count_word_units(documents), rules)
}

/// Same as [`count_segments`], starting from pre-counted word units.
pub fn count_segments_in_words(
    words: &[(WordUnit, u64)],
    rules: &SyllableRuleSet,
) -> SegmentFrequencyTable {
    let counts = words
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<String, u64>, (unit, n)| {
            for seg in rules.segment_unit(unit) {
                *acc.entry(seg.text).or_default() += n;
            }
            acc
        })
        .reduce(HashMap::new, merge_counts);
    let mut table = SegmentFrequencyTable::new();
    for (seg, n) in counts {
        table.add(&seg, n);
    }
    table
}

/// The base unit set: the top-k multi-character segments plus single
/// characters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawAlphabet", into = "RawAlphabet")]
pub struct Alphabet {
    k: usize,
    syllable_units: Vec<String>,
    char_units: Vec<char>,
    syllables: HashSet<String>,
    chars: HashSet<char>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlphabet {
    k: usize,
    syllable_units: Vec<String>,
    char_units: Vec<char>,
}

impl TryFrom<RawAlphabet> for Alphabet {
    type Error = Error;

    fn try_from(raw: RawAlphabet) -> Result<Self> {
        Alphabet::new(raw.syllable_units, raw.char_units, raw.k)
    }
}

impl From<Alphabet> for RawAlphabet {
    fn from(a: Alphabet) -> Self {
        RawAlphabet {
            k: a.k,
            syllable_units: a.syllable_units,
            char_units: a.char_units,
        }
    }
}

impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k
            && self.syllable_units == other.syllable_units
            && self.char_units == other.char_units
    }
}

impl Eq for Alphabet {}

/// Printable ASCII without the space, always part of the character units.
pub fn ascii_printable() -> impl Iterator<Item = char> {
    '\u{21}'..='\u{7e}'
}

impl Alphabet {
    /// Builds an alphabet, checking its invariants. Order is preserved.
    pub fn new(syllable_units: Vec<String>, char_units: Vec<char>, k: usize) -> Result<Self> {
        if syllable_units.len() > k {
            return Err(Error::Config(format!(
                "{} syllable units exceed k = {k}",
                syllable_units.len()
            )));
        }
        let chars: HashSet<char> = char_units.iter().copied().collect();
        if chars.len() != char_units.len() {
            return Err(Error::Config("duplicate character unit".into()));
        }
        if let Some(c) = char_units.iter().find(|&&c| is_reserved(c)) {
            return Err(Error::Config(format!("reserved character {c:?} in character units")));
        }
        let syllables: HashSet<String> = syllable_units.iter().cloned().collect();
        if syllables.len() != syllable_units.len() {
            return Err(Error::Config("duplicate syllable unit".into()));
        }
        for s in &syllable_units {
            if s.chars().count() < 2 {
                return Err(Error::Config(format!(
                    "syllable unit {s:?} must have at least two characters"
                )));
            }
            if let Some(c) = s.chars().find(|c| !chars.contains(c)) {
                return Err(Error::Config(format!(
                    "character {c:?} of syllable unit {s:?} is not a character unit"
                )));
            }
        }
        Ok(Self {
            k,
            syllable_units,
            char_units,
            syllables,
            chars,
        })
    }

    /// A pure character alphabet (k = 0).
    pub fn characters(chars: impl IntoIterator<Item = char>) -> Result<Self> {
        let set: std::collections::BTreeSet<char> = chars.into_iter().collect();
        Self::new(Vec::new(), set.into_iter().collect(), 0)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn syllable_units(&self) -> &[String] {
        &self.syllable_units
    }

    pub fn char_units(&self) -> &[char] {
        &self.char_units
    }

    /// |Σ|.
    pub fn len(&self) -> usize {
        self.syllable_units.len() + self.char_units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, unit: &str) -> bool {
        let mut it = unit.chars();
        match (it.next(), it.next()) {
            (Some(c), None) => self.chars.contains(&c),
            (Some(_), Some(_)) => self.syllables.contains(unit),
            _ => false,
        }
    }

    pub fn contains_char(&self, c: char) -> bool {
        self.chars.contains(&c)
    }

    /// All units in serialization order: syllables, then characters.
    pub fn units(&self) -> impl Iterator<Item = String> + '_ {
        self.syllable_units
            .iter()
            .cloned()
            .chain(self.char_units.iter().map(|c| c.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("alphabet serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// Keeps `segment` when it is a unit, otherwise splits it into single
    /// characters. Characters outside the alphabet come back as
    /// [`Origin::Unknown`].
    pub fn fallback_decompose(&self, segment: Segment) -> Vec<Segment> {
        let mut out = Vec::new();
        self.fallback_into(segment, &mut out);
        out
    }

    pub(crate) fn fallback_into(&self, segment: Segment, out: &mut Vec<Segment>) {
        if self.contains(&segment.text) {
            out.push(segment);
            return;
        }
        let start = out.len();
        for c in segment.text.chars() {
            out.push(Segment {
                text: c.to_string(),
                origin: if self.chars.contains(&c) {
                    Origin::Fallback
                } else {
                    Origin::Unknown
                },
                word_initial: false,
            });
        }
        if let Some(first) = out.get_mut(start) {
            first.word_initial = segment.word_initial;
        }
    }

    /// Syllabification followed by fallback, for one word unit.
    pub fn segment_unit(&self, unit: &WordUnit, rules: &SyllableRuleSet) -> Vec<Segment> {
        let mut out = Vec::new();
        for seg in rules.segment_unit(unit) {
            self.fallback_into(seg, &mut out);
        }
        out
    }
}

/// Selects the `k` most frequent multi-character segments (count
/// descending, text ascending) and adds every observed character plus
/// printable ASCII.
pub fn build_alphabet(table: &SegmentFrequencyTable, k: usize) -> Alphabet {
    let syllable_units: Vec<String> = table
        .ranked()
        .into_iter()
        .filter(|(s, _)| s.chars().nth(1).is_some() && !s.chars().any(is_reserved))
        .take(k)
        .map(|(s, _)| s.to_owned())
        .collect();
    let chars: std::collections::BTreeSet<char> = table
        .counts()
        .keys()
        .flat_map(|s| s.chars())
        .chain(ascii_printable())
        .filter(|&c| !is_reserved(c))
        .collect();
    Alphabet::new(syllable_units, chars.into_iter().collect(), k)
        .expect("alphabet built from a frequency table is consistent")
}

/// The practical segmentation: syllabify, then decompose every segment
/// outside the alphabet into characters.
pub fn practical_segment(
    text: &str,
    alphabet: &Alphabet,
    rules: &SyllableRuleSet,
) -> Vec<Segment> {
    let mut out = Vec::new();
    for seg in segment_text(text, rules) {
        alphabet.fallback_into(seg, &mut out);
    }
    out
}
