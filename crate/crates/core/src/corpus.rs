//! Corpus loading, normalization and pre-tokenization.
//!
//! A corpus is a file, or a directory of `.txt` files, holding one document
//! per line. Documents are normalized (NFC, optional lowercasing, optional
//! whitespace collapsing) and then split into [`WordUnit`]s. Word units are
//! the boundary that segmentation and merging never cross.

use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Unicode normalization form applied before anything else. Only NFC is
/// supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum UnicodeForm {
    #[default]
    #[serde(rename = "NFC")]
    Nfc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    pub unicode_form: UnicodeForm,
    pub lowercase: bool,
    pub collapse_whitespace: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            unicode_form: UnicodeForm::Nfc,
            lowercase: true,
            collapse_whitespace: true,
        }
    }
}

/// Normalizes `text`: NFC, then lowercasing and whitespace collapsing when
/// configured. Collapsing also trims leading and trailing whitespace, which
/// keeps the result reconstructible from its word units.
pub fn normalize(text: &str, config: &NormalizationConfig) -> String {
    let mut out: String = text.nfc().collect();
    if config.lowercase {
        // Case mapping can leave composable sequences behind.
        out = out.to_lowercase().nfc().collect();
    }
    if config.collapse_whitespace {
        let mut collapsed = String::with_capacity(out.len());
        for word in out.split_whitespace() {
            if !collapsed.is_empty() {
                collapsed.push(' ');
            }
            collapsed.push_str(word);
        }
        out = collapsed;
    }
    out
}

/// Like [`normalize`], but starts from raw bytes and reports the byte offset
/// of the first invalid UTF-8 sequence.
pub fn normalize_bytes(bytes: &[u8], config: &NormalizationConfig) -> Result<String> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Decode {
        offset: e.valid_up_to(),
    })?;
    Ok(normalize(text, config))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WordKind {
    Alphabetic,
    Numeric,
    Punctuation,
    Other,
}

impl WordKind {
    pub fn of(c: char) -> Self {
        if c.is_alphabetic() {
            WordKind::Alphabetic
        } else if c.is_numeric() {
            WordKind::Numeric
        } else if is_punctuation(c) {
            WordKind::Punctuation
        } else {
            WordKind::Other
        }
    }
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{00A1}' | '\u{00A7}' | '\u{00AB}' | '\u{00B6}' | '\u{00B7}' | '\u{00BB}' | '\u{00BF}'
                | '\u{2010}'..='\u{2027}'
                | '\u{2030}'..='\u{205E}'
                | '\u{3001}'..='\u{3003}'
                | '\u{3008}'..='\u{3011}'
        )
}

/// A maximal run of one character class, or a single punctuation character.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordUnit {
    pub text: String,
    pub kind: WordKind,
    /// Preceded by whitespace or the start of the document.
    pub word_initial: bool,
}

/// Splits normalized text into word units.
///
/// Joining the unit texts, with a single space before every word-initial
/// unit except the first, reproduces `text` when it was normalized with
/// whitespace collapsing.
pub fn pre_tokenize(text: &str) -> Vec<WordUnit> {
    let mut units = Vec::new();
    let mut current: Option<WordUnit> = None;
    let mut initial = true;

    for c in text.chars() {
        if c.is_whitespace() {
            units.extend(current.take());
            initial = true;
            continue;
        }
        let kind = WordKind::of(c);
        match current.as_mut() {
            Some(unit) if unit.kind == kind && kind != WordKind::Punctuation => unit.text.push(c),
            _ => {
                units.extend(current.take());
                current = Some(WordUnit {
                    text: c.to_string(),
                    kind,
                    word_initial: initial,
                });
                initial = false;
            }
        }
    }
    units.extend(current);
    units
}

/// Inverse of [`pre_tokenize`] on normalized text.
pub fn join_units(units: &[WordUnit]) -> String {
    let mut out = String::new();
    for (i, unit) in units.iter().enumerate() {
        if i > 0 && unit.word_initial {
            out.push(' ');
        }
        out.push_str(&unit.text);
    }
    out
}

/// Lists the files making up a corpus in deterministic order: the path
/// itself when it is a file, otherwise every `.txt` file below it sorted by
/// path.
pub fn corpus_files(path: &Path) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    let mut pending = vec![path.to_path_buf()];
    while let Some(dir) = pending.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            let p = entry.path();
            let ft = entry.file_type().map_err(|e| Error::io(&p, e))?;
            if ft.is_dir() {
                pending.push(p);
            } else if p.extension().is_some_and(|ext| ext == "txt") {
                files.push(p);
            }
        }
    }
    files.sort();
    Ok(files)
}

/// Streaming reader over the documents of a corpus: one document per line,
/// files in lexicographic path order, lines in file order.
pub struct Documents {
    files: std::vec::IntoIter<PathBuf>,
    current: Option<(PathBuf, BufReader<File>, usize, usize)>,
    buf: Vec<u8>,
}

/// Opens a corpus for streaming. See [`Documents`].
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Documents> {
    let files = corpus_files(path.as_ref())?;
    Ok(Documents {
        files: files.into_iter(),
        current: None,
        buf: Vec::new(),
    })
}

impl Iterator for Documents {
    type Item = Result<String>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.current.is_none() {
                let path = self.files.next()?;
                match File::open(&path) {
                    Ok(f) => self.current = Some((path, BufReader::new(f), 0, 0)),
                    Err(e) => return Some(Err(Error::io(path, e))),
                }
            }
            let (path, reader, line_no, offset) = self.current.as_mut().expect("file is open");
            self.buf.clear();
            match reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => {
                    self.current = None;
                    continue;
                }
                Ok(n) => {
                    *line_no += 1;
                    let line_start = *offset;
                    *offset += n;
                    let mut line = &self.buf[..];
                    if let Some(rest) = line.strip_suffix(b"\n") {
                        line = rest;
                    }
                    if let Some(rest) = line.strip_suffix(b"\r") {
                        line = rest;
                    }
                    return Some(match std::str::from_utf8(line) {
                        Ok(s) => Ok(s.to_owned()),
                        Err(e) => Err(Error::FileDecode {
                            path: path.clone(),
                            line: *line_no,
                            offset: line_start + e.valid_up_to(),
                        }),
                    });
                }
                Err(e) => {
                    let path = path.clone();
                    self.current = None;
                    return Some(Err(Error::io(path, e)));
                }
            }
        }
    }
}

/// A corpus held in memory together with a stable identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    /// `<name>:<sha256 prefix of the raw documents>`.
    pub id: String,
    pub documents: Vec<String>,
}

impl Corpus {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let documents = load_corpus(path)?.collect::<Result<Vec<_>>>()?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Ok(Self::from_documents(name, documents))
    }

    pub fn from_documents(name: impl AsRef<str>, documents: Vec<String>) -> Self {
        let mut hasher = Sha256::new();
        for doc in &documents {
            hasher.update(doc.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hex::encode(hasher.finalize());
        Self {
            id: format!("{}:{}", name.as_ref(), &digest[..12]),
            documents,
        }
    }

    /// Normalized copies of every document.
    pub fn normalized(&self, config: &NormalizationConfig) -> Vec<String> {
        use rayon::prelude::*;
        self.documents
            .par_iter()
            .map(|d| normalize(d, config))
            .collect()
    }
}

/// Occurrence counts of every distinct word unit over normalized documents,
/// sorted by unit. Documents are counted in parallel and the per-shard maps
/// merged, so the result does not depend on the thread count.
pub fn count_word_units<S: AsRef<str> + Sync>(documents: &[S]) -> Vec<(WordUnit, u64)> {
    use rayon::prelude::*;
    use std::collections::HashMap;

    let counts = documents
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<WordUnit, u64>, doc| {
            for unit in pre_tokenize(doc.as_ref()) {
                *acc.entry(unit).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, merge_counts);
    let mut sorted: Vec<_> = counts.into_iter().collect();
    sorted.sort_unstable();
    sorted
}

pub(crate) fn merge_counts<K: std::hash::Hash + Eq>(
    mut a: std::collections::HashMap<K, u64>,
    b: std::collections::HashMap<K, u64>,
) -> std::collections::HashMap<K, u64> {
    if a.len() < b.len() {
        return merge_counts(b, a);
    }
    for (k, v) in b {
        *a.entry(k).or_default() += v;
    }
    a
}
