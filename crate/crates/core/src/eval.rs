//! Corpus-level evaluation: run a segmenter over a training and an
//! evaluation corpus, fit the unigram on the former, score the latter.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::Alphabet;
use crate::bpe::{train_bpe, MergeSequence, MergeTable};
use crate::corpus::{normalize, pre_tokenize, NormalizationConfig, WordUnit};
use crate::error::{Error, Result};
use crate::metrics::{
    bits_per_character, cross_entropy_from_counts, renyi_efficiency, renyi_entropy, unit_chars,
    Smoothing, UnigramDistribution,
};
use crate::syllabifier::{Origin, SyllableRuleSet};
use crate::tokenizer::{training_word_types, TokenizerModel};
use crate::UNK;

/// Segments word units with the syllable alphabet, then applies merges
/// learned without boundary markers. Used for the plain-BPE rows of the
/// segmentation comparison, where no segmentation carries whitespace.
#[derive(Debug, Clone)]
pub struct BpeSegmenter {
    normalization: NormalizationConfig,
    rules: SyllableRuleSet,
    alphabet: Alphabet,
    merges: MergeSequence,
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    table: MergeTable,
}

impl BpeSegmenter {
    pub fn new(
        normalization: NormalizationConfig,
        rules: SyllableRuleSet,
        alphabet: Alphabet,
        merges: MergeSequence,
    ) -> Result<Self> {
        crate::bpe::validate_merge_sequence(&merges, &alphabet)?;
        let mut vocab: Vec<String> = alphabet.units().collect();
        let mut ids: HashMap<String, u32> = HashMap::new();
        for (i, u) in vocab.iter().enumerate() {
            ids.insert(u.clone(), i as u32);
        }
        for rule in merges.rules() {
            if !ids.contains_key(&rule.result) {
                ids.insert(rule.result.clone(), vocab.len() as u32);
                vocab.push(rule.result.clone());
            }
        }
        let table = MergeTable::new(&ids, &merges)?;
        Ok(Self {
            normalization,
            rules,
            alphabet,
            merges,
            vocab,
            ids,
            table,
        })
    }

    /// Learns merges over `alphabet` until the vocabulary reaches
    /// `target_vocab` units.
    pub fn train(
        words: &[(WordUnit, u64)],
        normalization: NormalizationConfig,
        rules: SyllableRuleSet,
        alphabet: Alphabet,
        target_vocab: usize,
    ) -> Result<Self> {
        let types = training_word_types(words, &alphabet, &rules, false);
        let merges = train_bpe(&types, &alphabet, target_vocab)?;
        Self::new(normalization, rules, alphabet, merges)
    }

    pub fn merges(&self) -> &MergeSequence {
        &self.merges
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Trained units plus UNK.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() + 1
    }

    fn for_each_unit(&self, doc: &str, f: &mut impl FnMut(&str)) {
        let norm = normalize(doc, &self.normalization);
        let unk = UNK.to_string();
        let mut ids: Vec<u32> = Vec::new();
        for unit in pre_tokenize(&norm) {
            ids.clear();
            for seg in self.alphabet.segment_unit(&unit, &self.rules) {
                match seg.origin {
                    Origin::Unknown => ids.push(u32::MAX),
                    _ => ids.push(self.ids[&seg.text]),
                }
            }
            self.table.apply(&mut ids);
            for &id in &ids {
                match self.vocab.get(id as usize) {
                    Some(t) => f(t),
                    None => f(&unk),
                }
            }
        }
    }
}

/// Something that turns documents into a unit stream.
#[derive(Debug, Clone)]
pub enum Segmenter {
    /// Every non-whitespace character is a unit.
    Character {
        normalization: NormalizationConfig,
        alphabet: Alphabet,
    },
    /// Syllabification with fallback to characters outside the alphabet.
    Syllable {
        normalization: NormalizationConfig,
        rules: SyllableRuleSet,
        alphabet: Alphabet,
    },
    Bpe(Box<BpeSegmenter>),
    /// A full tokenizer, boundary markers included.
    Model(Box<TokenizerModel>),
}

/// Unit counts and character totals of a segmented corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnitStats {
    pub counts: BTreeMap<String, u64>,
    pub units: u64,
    pub chars: u64,
}

impl UnitStats {
    fn from_counts(counts: BTreeMap<String, u64>) -> Self {
        let units = counts.values().sum();
        let chars = counts
            .iter()
            .map(|(u, &c)| unit_chars(u) as u64 * c)
            .sum();
        Self {
            counts,
            units,
            chars,
        }
    }
}

impl Segmenter {
    /// Size of the vocabulary the units are drawn from, UNK included.
    pub fn vocab_size(&self) -> usize {
        match self {
            Segmenter::Character { alphabet, .. } => alphabet.char_units().len() + 1,
            Segmenter::Syllable { alphabet, .. } => alphabet.len() + 1,
            Segmenter::Bpe(b) => b.vocab_size(),
            Segmenter::Model(m) => m.vocab_size(),
        }
    }

    pub fn rule_set_hash(&self) -> Option<String> {
        match self {
            Segmenter::Character { .. } => None,
            Segmenter::Syllable { rules, .. } => Some(rules.hash()),
            Segmenter::Bpe(b) => Some(b.rules.hash()),
            Segmenter::Model(m) => Some(m.rules().hash()),
        }
    }

    /// Calls `f` on every unit of `doc`, in order.
    pub fn for_each_unit(&self, doc: &str, mut f: impl FnMut(&str)) {
        let unk = UNK.to_string();
        match self {
            Segmenter::Character {
                normalization,
                alphabet,
            } => {
                let norm = normalize(doc, normalization);
                let mut buf = [0u8; 4];
                for c in norm.chars().filter(|c| !c.is_whitespace()) {
                    if alphabet.contains_char(c) {
                        f(c.encode_utf8(&mut buf));
                    } else {
                        f(&unk);
                    }
                }
            }
            Segmenter::Syllable {
                normalization,
                rules,
                alphabet,
            } => {
                let norm = normalize(doc, normalization);
                for unit in pre_tokenize(&norm) {
                    for seg in alphabet.segment_unit(&unit, rules) {
                        match seg.origin {
                            Origin::Unknown => f(&unk),
                            _ => f(&seg.text),
                        }
                    }
                }
            }
            Segmenter::Bpe(b) => b.for_each_unit(doc, &mut f),
            Segmenter::Model(m) => {
                for id in m.encode(doc) {
                    f(m.token_text(id).expect("encode yields valid ids"));
                }
            }
        }
    }

    pub fn segment(&self, doc: &str) -> Vec<String> {
        let mut out = Vec::new();
        self.for_each_unit(doc, |u| out.push(u.to_string()));
        out
    }

    /// Counts units over all documents in parallel.
    pub fn unit_stats<S: AsRef<str> + Sync>(&self, docs: &[S]) -> UnitStats {
        let counts = docs
            .par_iter()
            .fold(HashMap::new, |mut acc: HashMap<String, u64>, doc| {
                self.for_each_unit(doc.as_ref(), |u| match acc.get_mut(u) {
                    Some(c) => *c += 1,
                    None => {
                        acc.insert(u.to_string(), 1);
                    }
                });
                acc
            })
            .reduce(HashMap::new, crate::corpus::merge_counts);
        UnitStats::from_counts(counts.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub label: String,
    pub corpus_id: String,
    pub alpha: f64,
    pub smoothing: Smoothing,
}

/// One row of evaluation output. The segmentation fields are absent for
/// external token streams, which come without a fitted unigram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub corpus_id: String,
    pub vocab_size: usize,
    pub smoothing: Smoothing,
    pub alpha: f64,
    pub bits_per_segment: Option<f64>,
    pub chars_per_segment: Option<f64>,
    pub bits_per_character: Option<f64>,
    pub avg_chars_per_token: f64,
    pub renyi_entropy: f64,
    pub renyi_efficiency: f64,
    pub rule_set_hash: Option<String>,
    pub units: u64,
    pub chars: u64,
}

fn renyi_fields(eval: &UnitStats, vocab_size: usize, alpha: f64) -> Result<(f64, f64)> {
    let p = UnigramDistribution::from_counts(eval.counts.clone(), vocab_size, Smoothing::None)?;
    Ok((renyi_entropy(&p, alpha)?, renyi_efficiency(&p, alpha)?))
}

/// Builds a report from precomputed unit statistics. The unigram is fit on
/// `train`; Rényi figures use the empirical distribution of `eval`.
pub fn report_from_stats(
    train: &UnitStats,
    eval: &UnitStats,
    vocab_size: usize,
    rule_set_hash: Option<String>,
    options: &EvalOptions,
) -> Result<MetricsReport> {
    if eval.units == 0 {
        return Err(Error::EmptyInput("evaluation corpus"));
    }
    let q = UnigramDistribution::from_counts(train.counts.clone(), vocab_size, options.smoothing)?;
    let bps = cross_entropy_from_counts(&q, &eval.counts)?;
    let cps = eval.chars as f64 / eval.units as f64;
    let bpc = bits_per_character(bps, cps)?;
    let (h, eta) = renyi_fields(eval, vocab_size, options.alpha)?;
    Ok(MetricsReport {
        label: options.label.clone(),
        corpus_id: options.corpus_id.clone(),
        vocab_size,
        smoothing: options.smoothing,
        alpha: options.alpha,
        bits_per_segment: Some(bps),
        chars_per_segment: Some(cps),
        bits_per_character: Some(bpc),
        avg_chars_per_token: cps,
        renyi_entropy: h,
        renyi_efficiency: eta,
        rule_set_hash,
        units: eval.units,
        chars: eval.chars,
    })
}

/// Fits the unigram on `train` and scores `eval`.
pub fn evaluate<S: AsRef<str> + Sync>(
    train: &[S],
    eval: &[S],
    segmenter: &Segmenter,
    options: &EvalOptions,
) -> Result<MetricsReport> {
    let train_stats = segmenter.unit_stats(train);
    let eval_stats = segmenter.unit_stats(eval);
    report_from_stats(
        &train_stats,
        &eval_stats,
        segmenter.vocab_size(),
        segmenter.rule_set_hash(),
        options,
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StreamLine {
    tokens: Vec<String>,
    char_count: u64,
}

/// Reads a JSON Lines token stream, one `{"tokens": [...], "char_count": N}`
/// object per document. Blank lines are skipped. `chars` is the sum of the
/// declared character counts.
pub fn read_token_stream(reader: impl BufRead) -> Result<UnitStats> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut stats = UnitStats::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Adapter {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: StreamLine = serde_json::from_str(&line).map_err(|e| Error::Adapter {
            line: i + 1,
            message: e.to_string(),
        })?;
        stats.units += doc.tokens.len() as u64;
        stats.chars += doc.char_count;
        for t in doc.tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    stats.counts = counts;
    Ok(stats)
}

/// Report for an external token stream: only the token-level fields.
pub fn report_from_stream(stream: &UnitStats, vocab_size: usize, options: &EvalOptions) -> Result<MetricsReport> {
    if stream.units == 0 {
        return Err(Error::EmptyInput("token stream"));
    }
    let (h, eta) = renyi_fields(stream, vocab_size, options.alpha)?;
    Ok(MetricsReport {
        label: options.label.clone(),
        corpus_id: options.corpus_id.clone(),
        vocab_size,
        smoothing: options.smoothing,
        alpha: options.alpha,
        bits_per_segment: None,
        chars_per_segment: None,
        bits_per_character: None,
        avg_chars_per_token: stream.chars as f64 / stream.units as f64,
        renyi_entropy: h,
        renyi_efficiency: eta,
        rule_set_hash: None,
        units: stream.units,
        chars: stream.chars,
    })
}

type Column = (String, fn(&MetricsReport) -> Option<f64>);

/// Rows are (label, vocab size) pairs, columns are one metric per corpus,
/// both in first-appearance order.
fn render(reports: &[MetricsReport], first: &str, columns: &[Column]) -> String {
    let mut rows: Vec<(String, usize)> = Vec::new();
    let mut corpora: Vec<String> = Vec::new();
    for r in reports {
        if !rows.iter().any(|(l, v)| *l == r.label && *v == r.vocab_size) {
            rows.push((r.label.clone(), r.vocab_size));
        }
        if !corpora.contains(&r.corpus_id) {
            corpora.push(r.corpus_id.clone());
        }
    }
    let mut header1 = vec![String::new(), String::new()];
    let mut header2 = vec![first.to_string(), "Vocab".to_string()];
    for (name, _) in columns {
        for (i, c) in corpora.iter().enumerate() {
            header1.push(if i == 0 { name.clone() } else { String::new() });
            header2.push(c.clone());
        }
    }
    let mut table = vec![header1, header2];
    for (label, vocab) in &rows {
        let mut line = vec![label.clone(), vocab.to_string()];
        for (_, get) in columns {
            for c in &corpora {
                let cell = reports
                    .iter()
                    .find(|r| r.label == *label && r.vocab_size == *vocab && r.corpus_id == *c)
                    .and_then(get)
                    .map(|x| format!("{x:.4}"))
                    .unwrap_or_else(|| "-".to_string());
                line.push(cell);
            }
        }
        table.push(line);
    }
    let width = table[0].len();
    let widths: Vec<usize> = (0..width)
        .map(|j| table.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &table {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                if j == 0 {
                    format!("{cell:<w$}", w = widths[j])
                } else {
                    format!("{cell:>w$}", w = widths[j])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Bits per segment, characters per segment and bits per character.
pub fn render_segmentation_table(reports: &[MetricsReport]) -> String {
    render(
        reports,
        "Segmentation",
        &[
            ("Bits/Segment".into(), |r| r.bits_per_segment),
            ("Chars/Segment".into(), |r| r.chars_per_segment),
            ("Bits/Char".into(), |r| r.bits_per_character),
        ],
    )
}

/// Average characters per token and Rényi efficiency.
pub fn render_tokenization_table(reports: &[MetricsReport]) -> String {
    let alpha = reports.first().map(|r| r.alpha).unwrap_or(2.5);
    render(
        reports,
        "Tokenization",
        &[
            ("Chars/Token".into(), |r| Some(r.avg_chars_per_token)),
            (format!("Renyi eff (a={alpha})"), |r| Some(r.renyi_efficiency)),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::{build_alphabet, count_segments};

    fn docs() -> Vec<String> {
        ["makan nasi di pantai", "saya makan ikan", "anak makan nasi goreng"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn opts(smoothing: Smoothing) -> EvalOptions {
        EvalOptions {
            label: "x".into(),
            corpus_id: "mini".into(),
            alpha: 2.5,
            smoothing,
        }
    }

    #[test]
    fn character_baseline_is_degenerate() {
        let d = docs();
        let rules = SyllableRuleSet::default();
        let alphabet = build_alphabet(&count_segments(&d, &rules), 0);
        let seg = Segmenter::Character {
            normalization: NormalizationConfig::default(),
            alphabet,
        };
        let r = evaluate(&d, &d, &seg, &opts(Smoothing::None)).unwrap();
        assert_eq!(r.chars_per_segment, Some(1.0));
        assert_eq!(r.bits_per_segment, r.bits_per_character);
        assert_eq!(r.units, d.iter().map(|s| s.replace(' ', "").len() as u64).sum::<u64>());
    }

    #[test]
    fn syllable_report_is_consistent_and_deterministic() {
        let d = docs();
        let rules = SyllableRuleSet::default();
        let alphabet = build_alphabet(&count_segments(&d, &rules), 5);
        let seg = Segmenter::Syllable {
            normalization: NormalizationConfig::default(),
            rules,
            alphabet,
        };
        let held = vec!["makan ikan bakar".to_string()];
        let a = evaluate(&d, &held, &seg, &opts(Smoothing::AddOne)).unwrap();
        let b = evaluate(&d, &held, &seg, &opts(Smoothing::AddOne)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let (bps, cps, bpc) = (
            a.bits_per_segment.unwrap(),
            a.chars_per_segment.unwrap(),
            a.bits_per_character.unwrap(),
        );
        assert!((bpc * cps - bps).abs() < 1e-9);
        assert!((0.0..=1.0).contains(&a.renyi_efficiency));
        assert!(evaluate(&d, &held, &seg, &opts(Smoothing::None)).is_err());
    }

    #[test]
    fn unmarked_bpe_segments_words() {
        let d = docs();
        let rules = SyllableRuleSet::default();
        let norm = NormalizationConfig::default();
        let alphabet = build_alphabet(&count_segments(&d, &rules), 0);
        let words = crate::corpus::count_word_units(&d);
        let target = alphabet.len() + 4;
        let b = BpeSegmenter::train(&words, norm, rules, alphabet, target).unwrap();
        assert_eq!(b.vocab_size(), target + 1);
        let seg = Segmenter::Bpe(Box::new(b));
        let units = seg.segment("makan");
        assert_eq!(units.concat(), "makan");
        assert!(units.len() < 5);
    }

    #[test]
    fn token_stream_adapter() {
        let input = "{\"tokens\": [\"ma\", \"kan\"], \"char_count\": 5}\n\n{\"tokens\": [\"ma\"], \"char_count\": 2}\n";
        let s = read_token_stream(input.as_bytes()).unwrap();
        assert_eq!((s.units, s.chars), (3, 7));
        let r = report_from_stream(&s, 10, &opts(Smoothing::None)).unwrap();
        assert_eq!(r.bits_per_segment, None);
        assert!((r.avg_chars_per_token - 7.0 / 3.0).abs() < 1e-12);

        let bad = "{\"tokens\": [\"a\"], \"char_count\": 1}\n{\"tokens\": 3}\n";
        match read_token_stream(bad.as_bytes()) {
            Err(Error::Adapter { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tables_align() {
        let mk = |label: &str, corpus: &str, bpc: Option<f64>| MetricsReport {
            label: label.into(),
            corpus_id: corpus.into(),
            vocab_size: 680,
            smoothing: Smoothing::None,
            alpha: 2.5,
            bits_per_segment: bpc.map(|b| b * 2.0),
            chars_per_segment: bpc.map(|_| 2.0),
            bits_per_character: bpc,
            avg_chars_per_token: 2.0,
            renyi_entropy: 5.0,
            renyi_efficiency: 0.5,
            rule_set_hash: None,
            units: 1,
            chars: 2,
        };
        let reports = [
            mk("Syllable-based", "train", Some(2.7)),
            mk("Syllable-based", "heldout", Some(2.5)),
            mk("BPE", "train", None),
        ];
        let t = render_segmentation_table(&reports);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("Segmentation"));
        assert!(lines[2].contains("2.7000") && lines[2].contains("2.5000"));
        assert!(lines[3].contains('-'));
        let t2 = render_tokenization_table(&reports);
        assert!(t2.contains("Renyi eff (a=2.5)"));
    }
}
