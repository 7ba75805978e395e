//! Byte-pair-encoding style merge learning over an arbitrary base alphabet.
//!
//! Training is the greedy compression-utility search: at every step the
//! adjacent pair with the highest corpus frequency is merged, which is the
//! pair whose merge shortens the corpus the most. Pair counts never cross a
//! word and count non-overlapping occurrences only, so for a run `a a a` the
//! pair `(a, a)` counts once: exactly the number of merges a leftmost scan
//! would perform. Ties go to the lexicographically smallest `(left, right)`.
//!
//! Applying a sequence runs the rules in rank order. Each rule is a single
//! leftmost, non-overlapping pass.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, MARKER};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MergeRule {
    pub left: String,
    pub right: String,
    pub result: String,
    pub rank: usize,
}

/// Ordered merge rules. The rank of a rule is its position.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MergeSequence {
    rules: Vec<MergeRule>,
    base_alphabet_hash: String,
}

impl MergeSequence {
    pub fn new<I, L, R>(pairs: I, base_alphabet_hash: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = (L, R)>,
        L: Into<String>,
        R: Into<String>,
    {
        let rules = pairs
            .into_iter()
            .enumerate()
            .map(|(rank, (l, r))| {
                let (left, right) = (l.into(), r.into());
                MergeRule {
                    result: format!("{left}{right}"),
                    left,
                    right,
                    rank,
                }
            })
            .collect();
        Self {
            rules,
            base_alphabet_hash: base_alphabet_hash.into(),
        }
    }

    pub fn rules(&self) -> &[MergeRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn base_alphabet_hash(&self) -> &str {
        &self.base_alphabet_hash
    }

    pub fn pairs(&self) -> Vec<MergePair> {
        self.rules
            .iter()
            .map(|r| MergePair(r.left.clone(), r.right.clone()))
            .collect()
    }

    /// Keeps only the first `n` rules.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            rules: self.rules[..n.min(self.rules.len())].to_vec(),
            base_alphabet_hash: self.base_alphabet_hash.clone(),
        }
    }

    /// One `left right` line per rule, in rank order.
    pub fn to_lines(&self) -> String {
        self.rules
            .iter()
            .map(|r| format!("{} {}\n", r.left, r.right))
            .collect()
    }

    pub fn from_lines(text: &str, base_alphabet_hash: impl Into<String>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => pairs.push((l, r)),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "merge line {}: expected `left right`, got {line:?}",
                        i + 1
                    )))
                }
            }
        }
        Ok(Self::new(pairs, base_alphabet_hash))
    }
}

/// `[left, right]` as stored in model files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergePair(pub String, pub String);

/// Checks that every operand is a base unit or the result of an earlier
/// rule. Returns the first violation.
pub fn validate_against(merges: &MergeSequence, is_base: impl Fn(&str) -> bool) -> Result<()> {
    let mut created: HashSet<&str> = HashSet::new();
    for rule in &merges.rules {
        for operand in [&rule.left, &rule.right] {
            if !is_base(operand) && !created.contains(operand.as_str()) {
                return Err(Error::InvalidMerge {
                    rank: rule.rank,
                    operand: operand.clone(),
                });
            }
        }
        created.insert(&rule.result);
    }
    Ok(())
}

/// [`validate_against`] with the alphabet plus the boundary marker as the
/// base set.
pub fn validate_merge_sequence(merges: &MergeSequence, alphabet: &Alphabet) -> Result<()> {
    let marker = MARKER.to_string();
    validate_against(merges, |u| alphabet.contains(u) || u == marker)
}

/// Reference application of `merges` to one word: rules in rank order, one
/// leftmost non-overlapping pass each.
pub fn apply_merges<S: AsRef<str>>(units: &[S], merges: &MergeSequence) -> Vec<String> {
    let mut cur: Vec<String> = units.iter().map(|u| u.as_ref().to_owned()).collect();
    for rule in &merges.rules {
        if cur.len() < 2 {
            break;
        }
        let mut out = Vec::with_capacity(cur.len());
        let mut i = 0;
        while i < cur.len() {
            if i + 1 < cur.len() && cur[i] == rule.left && cur[i + 1] == rule.right {
                out.push(rule.result.clone());
                i += 2;
            } else {
                out.push(std::mem::take(&mut cur[i]));
                i += 1;
            }
        }
        cur = out;
    }
    cur
}

/// Id-level merge application against a fixed vocabulary.
#[derive(Debug, Clone)]
pub struct MergeTable {
    /// Per pair, the (rank, result id) of every rule merging it, rank order.
    ranks: HashMap<(u32, u32), Vec<(u32, u32)>>,
}

impl MergeTable {
    /// `vocab` must contain every operand and result.
    pub fn new(vocab: &HashMap<String, u32>, merges: &MergeSequence) -> Result<Self> {
        let id = |s: &str| {
            vocab.get(s).copied().ok_or_else(|| {
                Error::ModelFormat(format!("merge unit {s:?} missing from vocabulary"))
            })
        };
        let mut ranks: HashMap<(u32, u32), Vec<(u32, u32)>> = HashMap::new();
        for rule in &merges.rules {
            let key = (id(&rule.left)?, id(&rule.right)?);
            ranks
                .entry(key)
                .or_default()
                .push((rule.rank as u32, id(&rule.result)?));
        }
        Ok(Self { ranks })
    }

    /// Applies the rules in rank order. Equivalent to [`apply_merges`]: at
    /// every step the lowest-ranked rule not yet passed whose pair is
    /// present is applied, skipping rules that cannot match.
    pub fn apply(&self, units: &mut Vec<u32>) {
        let mut cursor = 0u32;
        while units.len() > 1 {
            let mut best: Option<(u32, u32, u32, u32)> = None;
            for w in units.windows(2) {
                if let Some(list) = self.ranks.get(&(w[0], w[1])) {
                    let at = list.partition_point(|&(r, _)| r < cursor);
                    if let Some(&(rank, result)) = list.get(at) {
                        if best.is_none_or(|b| rank < b.0) {
                            best = Some((rank, result, w[0], w[1]));
                        }
                    }
                }
            }
            let Some((rank, result, left, right)) = best else {
                break;
            };
            let mut write = 0;
            let mut read = 0;
            while read < units.len() {
                if read + 1 < units.len() && units[read] == left && units[read + 1] == right {
                    units[write] = result;
                    read += 2;
                } else {
                    units[write] = units[read];
                    read += 1;
                }
                write += 1;
            }
            units.truncate(write);
            cursor = rank + 1;
        }
    }
}

/// Word types with their corpus frequency: the input to training.
pub type WordTypes = Vec<(Vec<String>, u64)>;

/// Aggregates word unit sequences into sorted word types.
pub fn collect_word_types<I>(words: I) -> WordTypes
where
    I: IntoIterator<Item = (Vec<String>, u64)>,
{
    let mut map: HashMap<Vec<String>, u64> = HashMap::new();
    for (units, n) in words {
        if !units.is_empty() && n > 0 {
            *map.entry(units).or_default() += n;
        }
    }
    let mut out: WordTypes = map.into_iter().collect();
    out.sort_unstable();
    out
}

/// Non-overlapping adjacent pair counts within one word.
fn word_pairs(units: &[u32], mut emit: impl FnMut((u32, u32), i64)) {
    let mut i = 0;
    while i + 1 < units.len() {
        let (a, b) = (units[i], units[i + 1]);
        if a == b {
            let mut j = i;
            while j < units.len() && units[j] == a {
                j += 1;
            }
            emit((a, a), ((j - i) / 2) as i64);
            i = j - 1;
        } else {
            emit((a, b), 1);
            i += 1;
        }
    }
}

fn merge_word(units: &[u32], left: u32, right: u32, result: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(units.len());
    let mut i = 0;
    while i < units.len() {
        if i + 1 < units.len() && units[i] == left && units[i + 1] == right {
            out.push(result);
            i += 2;
        } else {
            out.push(units[i]);
            i += 1;
        }
    }
    out
}

#[derive(PartialEq, Eq)]
struct Candidate {
    count: i64,
    left: Reverse<String>,
    right: Reverse<String>,
    pair: (u32, u32),
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| self.left.cmp(&other.left))
            .then_with(|| self.right.cmp(&other.right))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy merge learning.
///
/// `words` are unit sequences with frequencies; every unit must be in
/// `alphabet` or be the boundary marker. Training stops once the vocabulary
/// (alphabet units plus distinct merge results) reaches `target_vocab`, or
/// when no pair occurs at least twice.
pub fn train_bpe(words: &[(Vec<String>, u64)], alphabet: &Alphabet, target_vocab: usize) -> Result<MergeSequence> {
    let base_size = alphabet.len();
    if target_vocab < base_size {
        return Err(Error::Config(format!(
            "target vocabulary {target_vocab} is smaller than the alphabet ({base_size} units)"
        )));
    }
    let marker = MARKER.to_string();
    let mut symbols: Vec<String> = Vec::new();
    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut intern = |s: &str, symbols: &mut Vec<String>| -> u32 {
        if let Some(&id) = ids.get(s) {
            return id;
        }
        let id = symbols.len() as u32;
        symbols.push(s.to_owned());
        ids.insert(s.to_owned(), id);
        id
    };

    let mut vocab: HashSet<String> = alphabet.units().collect();
    let mut corpus: Vec<(Vec<u32>, i64)> = Vec::with_capacity(words.len());
    for (units, freq) in words {
        let mut seq = Vec::with_capacity(units.len());
        for u in units {
            if !alphabet.contains(u) && *u != marker {
                return Err(Error::Config(format!(
                    "training unit {u:?} is not in the base alphabet"
                )));
            }
            seq.push(intern(u, &mut symbols));
        }
        corpus.push((seq, *freq as i64));
    }

    let mut counts: HashMap<(u32, u32), i64> = corpus
        .par_iter()
        .fold(HashMap::new, |mut acc, (seq, freq)| {
            word_pairs(seq, |p, n| *acc.entry(p).or_default() += n * freq);
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    let mut index: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (w, (seq, _)) in corpus.iter().enumerate() {
        for pair in seq.windows(2) {
            let list = index.entry((pair[0], pair[1])).or_default();
            if list.last() != Some(&w) {
                list.push(w);
            }
        }
    }
    let candidate = |pair: (u32, u32), count: i64, symbols: &[String]| Candidate {
        count,
        left: Reverse(symbols[pair.0 as usize].clone()),
        right: Reverse(symbols[pair.1 as usize].clone()),
        pair,
    };
    let mut heap: BinaryHeap<Candidate> = counts
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(&p, &c)| candidate(p, c, &symbols))
        .collect();

    let mut pairs: Vec<(String, String)> = Vec::new();
    while vocab.len() < target_vocab {
        let Some(top) = heap.pop() else { break };
        let current = counts.get(&top.pair).copied().unwrap_or(0);
        if current != top.count {
            continue;
        }
        if current < 2 {
            break;
        }
        let (left, right) = top.pair;
        let result_text = format!("{}{}", symbols[left as usize], symbols[right as usize]);
        let result = intern(&result_text, &mut symbols);
        pairs.push((symbols[left as usize].clone(), symbols[right as usize].clone()));
        vocab.insert(result_text);

        let mut delta: HashMap<(u32, u32), i64> = HashMap::new();
        let affected = index.remove(&top.pair).unwrap_or_default();
        for w in affected {
            let (seq, freq) = &corpus[w];
            if !seq.windows(2).any(|p| p[0] == left && p[1] == right) {
                continue;
            }
            let freq = *freq;
            word_pairs(seq, |p, n| *delta.entry(p).or_default() -= n * freq);
            let merged = merge_word(seq, left, right, result);
            word_pairs(&merged, |p, n| *delta.entry(p).or_default() += n * freq);
            for p in merged.windows(2) {
                if p[0] == result || p[1] == result {
                    let list = index.entry((p[0], p[1])).or_default();
                    if list.last() != Some(&w) {
                        list.push(w);
                    }
                }
            }
            corpus[w].0 = merged;
        }
        let mut changed: Vec<_> = delta.into_iter().filter(|(_, d)| *d != 0).collect();
        changed.sort_unstable();
        for (p, d) in changed {
            let c = counts.entry(p).or_default();
            *c += d;
            if *c > 0 {
                heap.push(candidate(p, *c, &symbols));
            }
        }
        counts.remove(&top.pair);
    }
    Ok(MergeSequence::new(pairs, alphabet.hash()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alphabet(chars: &str, syllables: &[&str]) -> Alphabet {
        Alphabet::new(
            syllables.iter().map(|s| s.to_string()).collect(),
            chars.chars().collect(),
            syllables.len(),
        )
        .unwrap()
    }

    fn words(ws: &[(&[&str], u64)]) -> WordTypes {
        collect_word_types(
            ws.iter()
                .map(|(u, n)| (u.iter().map(|s| s.to_string()).collect(), *n)),
        )
    }

    fn pair_list(m: &MergeSequence) -> Vec<(String, String)> {
        m.rules().iter().map(|r| (r.left.clone(), r.right.clone())).collect()
    }

    #[test]
    fn train_abab() {
        let a = alphabet("ab", &[]);
        let m = train_bpe(&words(&[(&["a", "b", "a", "b"], 1)]), &a, 3).unwrap();
        assert_eq!(pair_list(&m), [("a".into(), "b".into())]);
        let out = apply_merges(&["a", "b", "a", "b"], &m);
        assert_eq!(out, ["ab", "ab"]);
        assert_eq!(4 - out.len(), 2);
    }

    #[test]
    fn train_single_pair() {
        let a = alphabet("akmn", &["ma", "kan"]);
        let m = train_bpe(&words(&[(&["ma", "kan"], 10)]), &a, a.len() + 1).unwrap();
        assert_eq!(m.rules()[0].result, "makan");
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn zero_merges_at_alphabet_size() {
        let a = alphabet("ab", &[]);
        let m = train_bpe(&words(&[(&["a", "b", "a", "b"], 5)]), &a, 2).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn target_below_alphabet_is_config_error() {
        let a = alphabet("ab", &[]);
        assert!(matches!(train_bpe(&[], &a, 1), Err(Error::Config(_))));
        assert!(train_bpe(&[], &a, 10).unwrap().is_empty());
    }

    #[test]
    fn singleton_pairs_are_not_merged() {
        let a = alphabet("abc", &[]);
        let m = train_bpe(&words(&[(&["a", "b", "c"], 1)]), &a, 10).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn overlapping_runs_count_once_per_merge() {
        // (a,a) occurs twice without overlap in "aaaa" and once in "aaa"
        let a = alphabet("ab", &[]);
        let m = train_bpe(&words(&[(&["a", "a", "a"], 1), (&["a", "b"], 1)]), &a, 10).unwrap();
        assert!(m.is_empty());
        let m = train_bpe(&words(&[(&["a", "a", "a", "a"], 1)]), &a, 3).unwrap();
        assert_eq!(pair_list(&m), [("a".into(), "a".into())]);
    }

    #[test]
    fn ties_break_lexicographically() {
        let a = alphabet("abcd", &[]);
        let m = train_bpe(&words(&[(&["c", "d"], 2), (&["a", "b"], 2)]), &a, 5).unwrap();
        assert_eq!(pair_list(&m)[0], ("a".into(), "b".into()));
    }

    #[test]
    fn apply_examples() {
        let m = MergeSequence::new([("a", "b")], "");
        assert_eq!(apply_merges(&["a", "b", "c"], &m), ["ab", "c"]);
        let m = MergeSequence::new([("a", "a")], "");
        assert_eq!(apply_merges(&["a", "a", "a"], &m), ["aa", "a"]);
        let empty = MergeSequence::default();
        assert_eq!(apply_merges(&["ma", "kan"], &empty), ["ma", "kan"]);
    }

    #[test]
    fn validation_examples() {
        let a = alphabet("abc", &[]);
        assert!(validate_merge_sequence(&MergeSequence::new([("a", "b")], ""), &a).is_ok());
        match validate_merge_sequence(&MergeSequence::new([("ab", "c")], ""), &a) {
            Err(Error::InvalidMerge { rank, operand }) => {
                assert_eq!(rank, 0);
                assert_eq!(operand, "ab");
            }
            other => panic!("unexpected {other:?}"),
        }
        let ok = MergeSequence::new([("a", "b"), ("ab", "c")], "");
        assert!(validate_merge_sequence(&ok, &a).is_ok());
        let marker = MergeSequence::new([("\u{2581}", "a")], "");
        assert!(validate_merge_sequence(&marker, &a).is_ok());
    }

    #[test]
    fn lines_roundtrip() {
        let m = MergeSequence::new([("a", "b"), ("ab", "c")], "h");
        assert_eq!(m.to_lines(), "a b\nab c\n");
        assert_eq!(MergeSequence::from_lines(&m.to_lines(), "h").unwrap(), m);
        assert!(MergeSequence::from_lines("a b c\n", "h").is_err());
    }

    #[test]
    fn table_matches_reference_with_duplicate_results() {
        // "ma" is both a base unit and the result of [m, a]
        let m = MergeSequence::new([("ma", "kan"), ("m", "a"), ("k", "an"), ("a", "n")], "");
        let mut vocab = HashMap::new();
        for (i, u) in ["m", "a", "k", "n", "ma", "kan", "makan", "an", "kan2"]
            .iter()
            .enumerate()
        {
            vocab.insert(u.to_string(), i as u32);
        }
        let table = MergeTable::new(&vocab, &m).unwrap();
        for input in [
            vec!["m", "a", "kan"],
            vec!["ma", "kan"],
            vec!["m", "a", "k", "a", "n"],
            vec!["a", "n", "a", "n"],
        ] {
            let mut ids: Vec<u32> = input.iter().map(|u| vocab[*u]).collect();
            table.apply(&mut ids);
            let texts: Vec<String> = ids
                .iter()
                .map(|id| vocab.iter().find(|(_, v)| *v == id).unwrap().0.clone())
                .collect();
            assert_eq!(texts, apply_merges(&input, &m), "input {input:?}");
        }
    }

    #[test]
    fn training_state_matches_application() {
        let a = alphabet("abcdk", &[]);
        let ws = words(&[
            (&["a", "b", "c", "a", "b"], 3),
            (&["b", "c", "b", "c", "d"], 2),
            (&["a", "a", "a", "a", "b"], 2),
            (&["k", "a", "b", "c"], 1),
        ]);
        let m = train_bpe(&ws, &a, 12).unwrap();
        assert!(validate_merge_sequence(&m, &a).is_ok());
        let mut prev = usize::MAX;
        for n in 0..=m.len() {
            let p = m.prefix(n);
            let total: usize = ws
                .iter()
                .map(|(u, f)| apply_merges(u, &p).len() * *f as usize)
                .sum();
            assert!(total <= prev);
            prev = total;
        }
    }
}
