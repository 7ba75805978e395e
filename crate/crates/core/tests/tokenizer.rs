mod common;

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sukukata::bpe::MergePair;
use sukukata::corpus::{normalize, NormalizationConfig};
use sukukata::tokenizer::{ModelFile, SPECIAL_COUNT};
use sukukata::{train_tokenizer, Error, Mode, SyllableRuleSet, TokenizerModel, TrainConfig, MARKER};

fn config(mode: Mode, k: usize, target_vocab: usize) -> TrainConfig {
    TrainConfig {
        mode,
        k,
        target_vocab,
        normalization: NormalizationConfig::default(),
        rules: SyllableRuleSet::default(),
    }
}

fn model() -> &'static TokenizerModel {
    static MODEL: OnceLock<TokenizerModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let corpus = common::train_corpus();
        let docs = &corpus.documents[..2000];
        train_tokenizer(docs, &config(Mode::Syllable, 200, 800)).unwrap().model
    })
}

#[test]
fn roundtrip_on_fuzzed_text() {
    let m = model();
    let norm = NormalizationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..2000 {
        let text = normalize(&common::fuzz_text(&mut rng), &norm);
        let ids = m.encode(&text);
        assert!(!ids.contains(&m.unk_id()), "{text:?}");
        assert_eq!(m.decode(&ids).unwrap(), text);
    }
}

#[test]
fn pieces_concatenate_to_the_normalized_input() {
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let raw = common::fuzz_text(&mut rng);
        let text = normalize(&raw, m.normalization());
        let joined: String = m.encode_pieces(&raw).concat();
        let expected: String = text
            .split(' ')
            .filter(|w| !w.is_empty())
            .map(|w| format!("{MARKER}{w}"))
            .collect();
        assert_eq!(joined, expected);
    }
}

#[test]
fn unknown_characters_become_unk() {
    let m = model();
    let ids = m.encode("makan \u{4e2d}\u{6587} enak");
    assert_eq!(ids.iter().filter(|&&i| i == m.unk_id()).count(), 2);
    assert_eq!(m.decode(&ids).unwrap(), "makan \u{FFFD}\u{FFFD} enak");
}

#[test]
fn vocabulary_is_a_bijection_of_the_declared_size() {
    let m = model();
    assert_eq!(m.vocab_size(), 800 + SPECIAL_COUNT);
    for (id, text) in m.vocab().iter().enumerate() {
        assert_eq!(m.token_id(text), Some(id as u32));
    }
    let alphabet: Vec<String> = m.alphabet().units().collect();
    assert_eq!(&m.vocab()[..alphabet.len()], &alphabet[..]);
    for rule in m.merges().rules() {
        assert!(m.token_id(&rule.result).is_some());
    }
}

#[test]
fn save_load_preserves_encoding() {
    let m = model();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    m.save(&path).unwrap();
    let loaded = TokenizerModel::load(&path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), loaded.to_json());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let text = common::fuzz_text(&mut rng);
        assert_eq!(loaded.encode(&text), m.encode(&text));
    }
}

#[test]
fn truncated_model_fails_the_checksum() {
    let json = model().to_json();
    for cut in [1, json.len() / 3, json.len() / 2, json.len() - 2] {
        match TokenizerModel::from_json(&json[..cut]) {
            Err(Error::Checksum(_)) => {}
            other => panic!("cut at {cut}: {other:?}"),
        }
    }
}

#[test]
fn forward_reference_is_rejected_at_its_rank() {
    let m = model();
    let mut file = m.to_model_file();
    let n = file.body.merges.len();
    assert!(n > 10);
    // Move a rule that builds on an earlier merge result to the front.
    let dependent = m
        .merges()
        .rules()
        .iter()
        .position(|r| !m.alphabet().contains(&r.left) && r.left != MARKER.to_string())
        .expect("some rule uses a merged operand");
    let rule = file.body.merges.remove(dependent);
    let operand = rule.0.clone();
    file.body.merges.insert(0, rule);
    let sealed = ModelFile::seal(file.body);
    match TokenizerModel::from_json(&sealed.to_json()) {
        Err(Error::InvalidMerge { rank, operand: o }) => {
            assert_eq!(rank, 0);
            assert_eq!(o, operand);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unknown_merge_operand_is_rejected() {
    let mut file = model().to_model_file();
    file.body.merges.push(MergePair("qqq".into(), "zzz".into()));
    let rank = file.body.merges.len() - 1;
    let sealed = ModelFile::seal(file.body);
    match TokenizerModel::from_json(&sealed.to_json()) {
        Err(Error::InvalidMerge { rank: r, .. }) => assert_eq!(r, rank),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn training_is_reproducible_byte_for_byte() {
    let corpus = common::train_corpus();
    let docs = &corpus.documents[..1000];
    let cfg = config(Mode::Syllable, 100, 400);
    let a = train_tokenizer(docs, &cfg).unwrap().model.to_json();
    let b = train_tokenizer(docs, &cfg).unwrap().model.to_json();
    assert_eq!(a, b);
}

#[test]
fn plain_mode_has_no_multi_character_base_units() {
    let corpus = common::train_corpus();
    let docs = &corpus.documents[..1000];
    let plain = train_tokenizer(docs, &config(Mode::Plain, 100, 400)).unwrap();
    assert!(plain.model.alphabet().syllable_units().is_empty());
    assert_eq!(plain.model.vocab_size(), 400 + SPECIAL_COUNT);
    let syl = train_tokenizer(docs, &config(Mode::Syllable, 100, 400)).unwrap();
    assert!(plain.summary.merges > syl.summary.merges);
}

#[test]
fn saturated_k_keeps_every_distinct_syllable() {
    let docs = ["makan enak di pantai", "makan nasi"];
    let t = train_tokenizer(&docs, &config(Mode::Syllable, 1000, 200)).unwrap();
    assert!(t.summary.k_saturated);
    let distinct = t.frequencies.counts().keys().filter(|s| s.chars().count() > 1).count();
    assert_eq!(t.model.alphabet().syllable_units().len(), distinct);
}
