//! Unigram cross-entropy, bits per character and Rényi efficiency.
//!
//! Logarithms are base 2 throughout. Every sum runs over a sorted count
//! map, so results do not depend on how the counting was sharded.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::alphabet::MARKER;
use crate::error::{Error, Result};
use crate::tokenizer::TokenizerModel;

/// Distance from 1 below which `renyi_entropy` uses the Shannon limit.
pub const SHANNON_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    None,
    AddOne,
}

impl Smoothing {
    /// `None` when evaluating on the training corpus, `AddOne` otherwise.
    pub fn for_held_out(held_out: bool) -> Self {
        if held_out {
            Smoothing::AddOne
        } else {
            Smoothing::None
        }
    }
}

/// Unit counts for a stream.
pub fn count_units<I, S>(units: I) -> BTreeMap<String, u64>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for u in units {
        let u = u.as_ref();
        match counts.get_mut(u) {
            Some(c) => *c += 1,
            None => {
                counts.insert(u.to_string(), 1);
            }
        }
    }
    counts
}

/// Adds `other` into `into`.
pub fn merge_unit_counts(into: &mut BTreeMap<String, u64>, other: BTreeMap<String, u64>) {
    for (k, v) in other {
        *into.entry(k).or_insert(0) += v;
    }
}

/// A unigram distribution over a vocabulary of `vocab_size` entries, of
/// which the ones in `counts` were observed.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramDistribution {
    counts: BTreeMap<String, u64>,
    total: u64,
    vocab_size: usize,
    smoothing: Smoothing,
}

impl UnigramDistribution {
    pub fn from_counts(
        counts: BTreeMap<String, u64>,
        vocab_size: usize,
        smoothing: Smoothing,
    ) -> Result<Self> {
        let counts: BTreeMap<String, u64> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        if counts.len() > vocab_size {
            return Err(Error::InvalidArgument(format!(
                "{} distinct units observed but vocabulary size is {vocab_size}",
                counts.len()
            )));
        }
        let total = counts.values().sum();
        match smoothing {
            Smoothing::None if total == 0 => {
                return Err(Error::EmptyInput("unsmoothed unigram over an empty stream"))
            }
            Smoothing::AddOne if vocab_size == 0 => {
                return Err(Error::InvalidArgument("vocabulary size is zero".into()))
            }
            _ => {}
        }
        Ok(Self {
            counts,
            total,
            vocab_size,
            smoothing,
        })
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    fn denominator(&self) -> f64 {
        match self.smoothing {
            Smoothing::None => self.total as f64,
            Smoothing::AddOne => (self.total + self.vocab_size as u64) as f64,
        }
    }

    fn prob_of_count(&self, c: u64) -> f64 {
        match self.smoothing {
            Smoothing::None => c as f64 / self.denominator(),
            Smoothing::AddOne => (c + 1) as f64 / self.denominator(),
        }
    }

    /// Probability of `unit`. Units never observed get the add-one floor,
    /// or zero without smoothing.
    pub fn probability(&self, unit: &str) -> f64 {
        self.prob_of_count(self.counts.get(unit).copied().unwrap_or(0))
    }

    /// Number of vocabulary entries that were never observed.
    pub fn unseen(&self) -> usize {
        self.vocab_size - self.counts.len()
    }

    /// Σ f(p) over the whole vocabulary, skipping zero-probability entries.
    fn sum_over_support(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut sum: f64 = self.counts.values().map(|&c| f(self.prob_of_count(c))).sum();
        if self.smoothing == Smoothing::AddOne && self.unseen() > 0 {
            sum += self.unseen() as f64 * f(self.prob_of_count(0));
        }
        sum
    }

    pub fn probability_mass(&self) -> f64 {
        self.sum_over_support(|p| p)
    }
}

/// Fits a unigram distribution to a unit stream.
pub fn fit_unigram<I, S>(units: I, vocab_size: usize, smoothing: Smoothing) -> Result<UnigramDistribution>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    UnigramDistribution::from_counts(count_units(units), vocab_size, smoothing)
}

/// Mean −log₂ q(u) over evaluation units given as counts.
pub fn cross_entropy_from_counts(q: &UnigramDistribution, eval: &BTreeMap<String, u64>) -> Result<f64> {
    let mut bits = 0.0;
    let mut n = 0u64;
    for (unit, &c) in eval {
        if c == 0 {
            continue;
        }
        let p = q.probability(unit);
        if p <= 0.0 {
            return Err(Error::ZeroProbability { unit: unit.clone() });
        }
        bits -= c as f64 * p.log2();
        n += c;
    }
    if n == 0 {
        return Err(Error::EmptyInput("evaluation stream"));
    }
    Ok(bits / n as f64)
}

/// Mean −log₂ q(u) over a unit stream: the bits per segment.
pub fn cross_entropy_bits_per_segment<I, S>(q: &UnigramDistribution, eval_units: I) -> Result<f64>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    cross_entropy_from_counts(q, &count_units(eval_units))
}

/// Characters a unit stands for: the boundary marker does not count.
pub fn unit_chars(unit: &str) -> usize {
    unit.chars().filter(|&c| c != MARKER).count()
}

/// Original characters per unit.
pub fn chars_per_segment<I, S>(units: I) -> Result<f64>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let (mut chars, mut n) = (0usize, 0usize);
    for u in units {
        chars += unit_chars(u.as_ref());
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyInput("unit stream"));
    }
    Ok(chars as f64 / n as f64)
}

pub fn bits_per_character(bits_per_segment: f64, chars_per_segment: f64) -> Result<f64> {
    if chars_per_segment.is_nan() || chars_per_segment <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "characters per segment must be positive, got {chars_per_segment}"
        )));
    }
    Ok(bits_per_segment / chars_per_segment)
}

/// Shannon entropy in bits.
pub fn shannon_entropy(p: &UnigramDistribution) -> f64 {
    let h = -p.sum_over_support(|x| if x > 0.0 { x * x.log2() } else { 0.0 });
    h.max(0.0)
}

/// Rényi entropy of order `alpha` in bits.
pub fn renyi_entropy(p: &UnigramDistribution, alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::InvalidArgument(format!("alpha must be non-negative, got {alpha}")));
    }
    if (alpha - 1.0).abs() <= SHANNON_EPSILON {
        return Ok(shannon_entropy(p));
    }
    let sum = p.sum_over_support(|x| if x > 0.0 { x.powf(alpha) } else { 0.0 });
    Ok((sum.log2() / (1.0 - alpha)).max(0.0))
}

/// H_α(p) / log₂ |V|, with |V| the full vocabulary size.
pub fn renyi_efficiency(p: &UnigramDistribution, alpha: f64) -> Result<f64> {
    if p.vocab_size() < 2 {
        return Err(Error::InvalidArgument(format!(
            "efficiency needs a vocabulary of at least 2, got {}",
            p.vocab_size()
        )));
    }
    let h = renyi_entropy(p, alpha)?;
    Ok((h / (p.vocab_size() as f64).log2()).clamp(0.0, 1.0))
}

/// Non-whitespace characters of the normalized text per token.
pub fn avg_chars_per_token(text: &str, model: &TokenizerModel) -> Result<f64> {
    let norm = crate::corpus::normalize(text, model.normalization());
    let chars = norm.chars().filter(|c| !c.is_whitespace()).count();
    let tokens = model.encode(&norm).len();
    if tokens == 0 {
        return Err(Error::EmptyInput("text"));
    }
    Ok(chars as f64 / tokens as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(pairs: &[(&str, u64)], v: usize, s: Smoothing) -> UnigramDistribution {
        let counts = pairs.iter().map(|&(k, c)| (k.to_string(), c)).collect();
        UnigramDistribution::from_counts(counts, v, s).unwrap()
    }

    #[test]
    fn fit_examples() {
        let q = fit_unigram(["a", "a", "b"], 2, Smoothing::None).unwrap();
        assert!((q.probability("a") - 2.0 / 3.0).abs() < 1e-15);
        assert!((q.probability("b") - 1.0 / 3.0).abs() < 1e-15);

        let q = fit_unigram(["a", "a", "b"], 3, Smoothing::AddOne).unwrap();
        assert_eq!(q.probability("a"), 0.5);
        assert!((q.probability("b") - 2.0 / 6.0).abs() < 1e-15);
        assert!((q.probability("c") - 1.0 / 6.0).abs() < 1e-15);
        assert!((q.probability_mass() - 1.0).abs() < 1e-12);

        assert!(fit_unigram(Vec::<&str>::new(), 3, Smoothing::None).is_err());
        let u = fit_unigram(Vec::<&str>::new(), 4, Smoothing::AddOne).unwrap();
        assert_eq!(u.probability("x"), 0.25);
        assert!(fit_unigram(["a", "b", "c"], 2, Smoothing::None).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let q = dist(&[("a", 1), ("b", 1), ("c", 1), ("d", 1)], 4, Smoothing::None);
        let h = cross_entropy_bits_per_segment(&q, ["a", "d", "d"]).unwrap();
        assert!((h - 2.0).abs() < 1e-12);

        let q = fit_unigram("aaab".split("").filter(|s| !s.is_empty()), 2, Smoothing::None).unwrap();
        let h = cross_entropy_bits_per_segment(&q, ["a", "a", "a", "b"]).unwrap();
        assert!((h - 0.811_278_124_459_132_8).abs() < 1e-12);

        match cross_entropy_bits_per_segment(&q, ["a", "z"]) {
            Err(Error::ZeroProbability { unit }) => assert_eq!(unit, "z"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn chars_and_bpc() {
        assert_eq!(chars_per_segment(["ma", "kan"]).unwrap(), 2.5);
        assert_eq!(chars_per_segment(["\u{2581}ma", "kan"]).unwrap(), 2.5);
        assert_eq!(chars_per_segment(["a", "b", "c"]).unwrap(), 1.0);
        assert!(chars_per_segment(Vec::<&str>::new()).is_err());
        assert!((bits_per_character(5.27, 1.93).unwrap() - 2.73).abs() < 0.005);
        assert_eq!(bits_per_character(0.0, 3.0).unwrap(), 0.0);
        assert!(bits_per_character(1.0, 0.0).is_err());
    }

    #[test]
    fn renyi_examples() {
        let uniform = dist(&[("a", 3), ("b", 3), ("c", 3), ("d", 3)], 4, Smoothing::None);
        for alpha in [0.0, 0.5, 1.0, 2.0, 2.5, 10.0] {
            assert!((renyi_entropy(&uniform, alpha).unwrap() - 2.0).abs() < 1e-12);
            assert!((renyi_efficiency(&uniform, alpha).unwrap() - 1.0).abs() < 1e-12);
        }
        let point = dist(&[("x", 7)], 5, Smoothing::None);
        assert_eq!(renyi_entropy(&point, 2.5).unwrap(), 0.0);
        assert_eq!(renyi_efficiency(&point, 2.5).unwrap(), 0.0);

        let p = dist(&[("a", 2), ("b", 1), ("c", 1)], 3, Smoothing::None);
        let h2 = renyi_entropy(&p, 2.0).unwrap();
        assert!((h2 - (1.0f64 / 0.375).log2()).abs() < 1e-12);
        assert!((h2 - 1.4150).abs() < 5e-5);
        assert!((renyi_entropy(&p, 1.0).unwrap() - 1.5).abs() < 1e-12);

        assert!(renyi_entropy(&p, -0.5).is_err());
        assert!(renyi_efficiency(&dist(&[("a", 1)], 1, Smoothing::None), 2.0).is_err());
    }

    #[test]
    fn unseen_mass_counts_toward_entropy() {
        let s = dist(&[], 8, Smoothing::AddOne);
        assert!((renyi_entropy(&s, 2.5).unwrap() - 3.0).abs() < 1e-12);
        assert!((shannon_entropy(&s) - 3.0).abs() < 1e-12);
    }
}
