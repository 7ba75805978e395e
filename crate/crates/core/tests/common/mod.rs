#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::Rng;
use sukukata::alphabet::Alphabet;
use sukukata::corpus::Corpus;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn train_corpus() -> Corpus {
    Corpus::load(data_dir().join("id_news_train.txt")).expect("bundled training corpus")
}

pub fn heldout_corpus() -> Corpus {
    Corpus::load(data_dir().join("id_news_heldout.txt")).expect("bundled held-out corpus")
}

const SYLLABLES: &[&str] = &[
    "ma", "kan", "me", "ngam", "bil", "ber", "ja", "lan", "pe", "ru", "sa", "ha", "an", "struk",
    "tur", "nya", "i", "bu", "ke", "ta", "di", "pan", "tra", "kh", "sy", "o", "u", "ang", "ling",
];
const SYMBOLS: &[&str] = &[
    ".", ",", "!", "?", "-", "\"", "'", "(", ")", ":", ";", "%", "/", "&", "@", "#", "$", "*",
];

/// A random string built from word-like pieces, digits, punctuation and
/// assorted whitespace. Every character is printable ASCII or whitespace,
/// so any alphabet that includes printable ASCII encodes it without UNK.
pub fn fuzz_text(rng: &mut impl Rng) -> String {
    let mut s = String::new();
    let pieces = rng.gen_range(0..12);
    for _ in 0..pieces {
        match rng.gen_range(0..10) {
            0..=4 => {
                for _ in 0..rng.gen_range(1..4) {
                    let syl = SYLLABLES[rng.gen_range(0..SYLLABLES.len())];
                    if rng.gen_bool(0.1) {
                        s.push_str(&syl.to_uppercase());
                    } else {
                        s.push_str(syl);
                    }
                }
            }
            5 => s.push_str(&rng.gen_range(0..100_000).to_string()),
            6 => s.push_str(SYMBOLS[rng.gen_range(0..SYMBOLS.len())]),
            7 => {
                let c = rng.gen_range(0x21u8..0x7f) as char;
                s.push(c);
            }
            8 => s.push_str(["  ", "\t", " \n ", "\r\n"][rng.gen_range(0..4)]),
            _ => s.push(' '),
        }
        if rng.gen_bool(0.6) {
            s.push(' ');
        }
    }
    s
}

/// Number of replacements a leftmost, non-overlapping pass makes.
fn occurrences(word: &[String], left: &str, right: &str) -> u64 {
    let (mut i, mut n) = (0, 0);
    while i + 1 < word.len() {
        if word[i] == left && word[i + 1] == right {
            n += 1;
            i += 2;
        } else {
            i += 1;
        }
    }
    n
}

fn merge(word: &[String], left: &str, right: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < word.len() {
        if i + 1 < word.len() && word[i] == left && word[i + 1] == right {
            out.push(format!("{left}{right}"));
            i += 2;
        } else {
            out.push(word[i].clone());
            i += 1;
        }
    }
    out
}

pub fn brute_force(words: &[(Vec<String>, u64)], base: &[String], target: usize) -> Vec<(String, String)> {
    let mut words: Vec<(Vec<String>, u64)> = words.to_vec();
    let mut vocab: BTreeSet<String> = base.iter().cloned().collect();
    let mut merges = Vec::new();
    while vocab.len() < target {
        let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (w, f) in &words {
            let distinct: BTreeSet<(String, String)> =
                w.windows(2).map(|p| (p[0].clone(), p[1].clone())).collect();
            for (l, r) in distinct {
                let n = occurrences(w, &l, &r) * f;
                *counts.entry((l, r)).or_insert(0) += n;
            }
        }
        // BTreeMap iterates pairs in ascending order, so the first maximum
        // is the lexicographically smallest.
        let mut best: Option<(&(String, String), u64)> = None;
        for (p, &c) in &counts {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((p, c));
            }
        }
        let Some(((l, r), c)) = best else { break };
        if c < 2 {
            break;
        }
        let (l, r) = (l.clone(), r.clone());
        for (w, _) in words.iter_mut() {
            *w = merge(w, &l, &r);
        }
        vocab.insert(format!("{l}{r}"));
        merges.push((l, r));
    }
    merges
}

/// A small corpus over a few characters and, sometimes, two-character
/// base units.
pub fn random_case(rng: &mut impl Rng) -> (Vec<(Vec<String>, u64)>, Alphabet) {
    let chars: Vec<char> = "abcd".chars().take(rng.gen_range(2..=4)).collect();
    let syllables: Vec<String> = if rng.gen_bool(0.5) {
        vec![format!("{}{}", chars[0], chars[1]), format!("{}{}", chars[1], chars[0])]
    } else {
        Vec::new()
    };
    let alphabet = Alphabet::new(syllables.clone(), chars.clone(), syllables.len()).unwrap();
    let units: Vec<String> = syllables
        .iter()
        .cloned()
        .chain(chars.iter().map(|c| c.to_string()))
        .collect();
    let mut budget = rng.gen_range(10..=200usize);
    let mut words = Vec::new();
    while budget > 0 {
        let mut word = Vec::new();
        let len = rng.gen_range(1..=8);
        for _ in 0..len {
            let u = units[rng.gen_range(0..units.len())].clone();
            let n = u.chars().count();
            if n > budget {
                break;
            }
            budget -= n;
            word.push(u);
        }
        if word.is_empty() {
            break;
        }
        words.push((word, rng.gen_range(1..=3)));
    }
    words.sort();
    let mut merged: Vec<(Vec<String>, u64)> = Vec::new();
    for (w, f) in words {
        match merged.last_mut() {
            Some((lw, lf)) if *lw == w => *lf += f,
            _ => merged.push((w, f)),
        }
    }
    (merged, alphabet)
}
