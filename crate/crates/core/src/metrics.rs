//! Text and regression metrics: BLEU, METEOR (exact-surface matching), MAE,
//! exact match and Levenshtein distance, plus corpus aggregation.
//!
//! Tokenization is a Unicode-whitespace split and is case-sensitive.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::OnceLock;

use indexmap::IndexMap;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TOKENIZATION: &str = "unicode-whitespace, case-sensitive";

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("predictions ({predictions}) and targets ({targets}) differ in length")]
    LengthMismatch { predictions: usize, targets: usize },
    #[error("no samples")]
    Empty,
    #[error("sample {index}: no numeric value in `{text}`")]
    NoNumber { index: usize, text: String },
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
}

pub fn tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BleuOptions {
    pub max_n: usize,
    /// Clip candidate n-gram counts by their reference counts.
    pub clipped: bool,
}

impl Default for BleuOptions {
    fn default() -> Self {
        BleuOptions { max_n: 4, clipped: true }
    }
}

fn ngram_counts<'a>(toks: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], usize> {
    let mut m = HashMap::new();
    if toks.len() >= n {
        for w in toks.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Modified n-gram precision `p_n`; 0 when the candidate has no n-grams.
pub fn ngram_precision(candidate: &[&str], reference: &[&str], n: usize, clipped: bool) -> f64 {
    if n == 0 || candidate.len() < n {
        return 0.0;
    }
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let total = candidate.len() - n + 1;
    let hits: usize = cand
        .iter()
        .map(|(g, &c)| {
            let r = refc.get(g).copied().unwrap_or(0);
            if clipped {
                c.min(r)
            } else if r > 0 {
                c
            } else {
                0
            }
        })
        .sum();
    hits as f64 / total as f64
}

pub fn brevity_penalty(c: usize, r: usize) -> f64 {
    if c == 0 {
        0.0
    } else if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    }
}

pub fn bleu_with(candidate: &str, reference: &str, opts: BleuOptions) -> f64 {
    let c = tokens(candidate);
    let r = tokens(reference);
    if c.is_empty() || opts.max_n == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=opts.max_n {
        let p = ngram_precision(&c, &r, n, opts.clipped);
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
    }
    brevity_penalty(c.len(), r.len()) * (log_sum / opts.max_n as f64).exp()
}

/// Sentence BLEU with N = 4 and clipped counts.
pub fn bleu(candidate: &str, reference: &str) -> f64 {
    bleu_with(candidate, reference, BleuOptions::default())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeteorParts {
    pub matched: usize,
    pub chunks: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_mean: f64,
    pub penalty: f64,
    pub score: f64,
}

/// Unigram alignment: each candidate token, left to right, takes the
/// leftmost unused reference token with the same surface form.
pub fn align(candidate: &[&str], reference: &[&str]) -> Vec<(usize, usize)> {
    let mut used = vec![false; reference.len()];
    let mut pairs = Vec::new();
    for (i, t) in candidate.iter().enumerate() {
        if let Some(j) = (0..reference.len()).find(|&j| !used[j] && reference[j] == *t) {
            used[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

pub fn meteor_parts(candidate: &str, reference: &str) -> MeteorParts {
    let c = tokens(candidate);
    let r = tokens(reference);
    let pairs = align(&c, &r);
    let matched = pairs.len();
    if matched == 0 {
        return MeteorParts { matched: 0, chunks: 0, precision: 0.0, recall: 0.0, f_mean: 0.0, penalty: 0.0, score: 0.0 };
    }
    let chunks = 1 + pairs.windows(2).filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1)).count();
    debug_assert!(chunks <= matched);
    let precision = matched as f64 / c.len() as f64;
    let recall = matched as f64 / r.len() as f64;
    let f_mean = 10.0 * precision * recall / (9.0 * precision + recall);
    let penalty = 0.5 * chunks as f64 / matched as f64;
    MeteorParts { matched, chunks, precision, recall, f_mean, penalty, score: f_mean * (1.0 - penalty) }
}

pub fn meteor(candidate: &str, reference: &str) -> f64 {
    meteor_parts(candidate, reference).score
}

pub fn mae(predictions: &[f64], targets: &[f64]) -> Result<f64, MetricsError> {
    if predictions.len() != targets.len() {
        return Err(MetricsError::LengthMismatch { predictions: predictions.len(), targets: targets.len() });
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / predictions.len() as f64)
}

/// 1.0 when the strings agree after collapsing whitespace runs.
pub fn exact_match(candidate: &str, reference: &str) -> f64 {
    if tokens(candidate) == tokens(reference) {
        1.0
    } else {
        0.0
    }
}

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?").expect("valid regex"))
}

/// The numeric literal a generated answer reports: the first number after
/// the last `:` if there is one, else the first number in the text.
pub fn extract_literal(text: &str) -> Option<&str> {
    let tail_start = text.rfind(':').map_or(0, |i| i + 1);
    number_re()
        .find(&text[tail_start..])
        .or_else(|| number_re().find(text))
        .map(|m| m.as_str())
}

pub fn extract_number(text: &str) -> Option<f64> {
    extract_literal(text)?.parse().ok()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Bleu,
    Meteor,
    Mae,
    Exact,
    Lev,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Bleu, Metric::Meteor, Metric::Mae, Metric::Exact, Metric::Lev];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Bleu => "bleu",
            Metric::Meteor => "meteor",
            Metric::Mae => "mae",
            Metric::Exact => "exact",
            Metric::Lev => "lev",
        }
    }

    /// Comma-separated metric names.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>, MetricsError> {
        s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(str::parse).collect()
    }
}

impl FromStr for Metric {
    type Err = MetricsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| MetricsError::UnknownMetric(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: IndexMap<String, f64>,
    pub samples: usize,
    pub tokenization: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_sample: Option<IndexMap<String, Vec<f64>>>,
}

/// Mean of per-sample scores for each metric; MAE is computed over numbers
/// extracted from each text.
pub fn evaluate(
    predictions: &[String],
    references: &[String],
    metrics: &[Metric],
    keep_per_sample: bool,
) -> Result<MetricReport, MetricsError> {
    if predictions.len() != references.len() {
        return Err(MetricsError::LengthMismatch { predictions: predictions.len(), targets: references.len() });
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = predictions.len() as f64;
    let mut out = IndexMap::new();
    let mut per = IndexMap::new();
    for &m in metrics {
        let values: Vec<f64> = match m {
            Metric::Mae => {
                let num = |i: usize, t: &String| {
                    extract_number(t).ok_or_else(|| MetricsError::NoNumber { index: i, text: t.clone() })
                };
                let p = predictions.iter().enumerate().map(|(i, t)| num(i, t)).collect::<Result<Vec<_>, _>>()?;
                let r = references.iter().enumerate().map(|(i, t)| num(i, t)).collect::<Result<Vec<_>, _>>()?;
                p.iter().zip(&r).map(|(a, b)| (a - b).abs()).collect()
            }
            _ => predictions
                .iter()
                .zip(references)
                .map(|(p, r)| match m {
                    Metric::Bleu => bleu(p, r),
                    Metric::Meteor => meteor(p, r),
                    Metric::Exact => exact_match(p, r),
                    Metric::Lev => levenshtein(p, r) as f64,
                    Metric::Mae => unreachable!(),
                })
                .collect(),
        };
        out.insert(m.name().to_string(), values.iter().sum::<f64>() / n);
        per.insert(m.name().to_string(), values);
    }
    Ok(MetricReport {
        metrics: out,
        samples: predictions.len(),
        tokenization: TOKENIZATION.to_string(),
        per_sample: keep_per_sample.then_some(per),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bleu_worked_examples() {
        assert_eq!(bleu("a b c d", "a b c d"), 1.0);
        let two = BleuOptions { max_n: 2, clipped: true };
        assert!((bleu_with("the cat", "the cat sat", two) - (-0.5f64).exp()).abs() < 1e-12);
        assert_eq!(bleu("x y z w", "a b c d"), 0.0);
        assert_eq!(bleu("", "a"), 0.0);
    }

    #[test]
    fn clipping_flag() {
        let c = tokens("the the the");
        let r = tokens("the cat");
        assert!((ngram_precision(&c, &r, 1, true) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ngram_precision(&c, &r, 1, false), 1.0);
    }

    #[test]
    fn meteor_worked_examples() {
        assert!((meteor("a b c d", "a b c d") - 0.875).abs() < 1e-12);
        assert!((meteor("a", "a") - 0.5).abs() < 1e-12);
        assert_eq!(meteor("a b", "c d"), 0.0);
        let p = meteor_parts("a b x c", "a b c");
        assert_eq!((p.matched, p.chunks), (3, 2));
    }

    #[test]
    fn asymmetric() {
        assert_ne!(bleu("a b c d e", "a b c d"), bleu("a b c d", "a b c d e"));
        assert_ne!(meteor("a b c", "a b c d e"), meteor("a b c d e", "a b c"));
    }

    #[test]
    fn mae_cases() {
        assert!((mae(&[0.3, 0.5], &[0.1, 0.5]).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(mae(&[1.0], &[]), Err(MetricsError::LengthMismatch { predictions: 1, targets: 0 }));
        assert_eq!(mae(&[], &[]), Err(MetricsError::Empty));
    }

    #[test]
    fn string_metrics() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("CCO", "CCN"), 1);
        assert_eq!(exact_match(" CC  O", "CC O"), 1.0);
        assert_eq!(exact_match("CCO", "CCN"), 0.0);
    }

    #[test]
    fn numeric_extraction() {
        assert_eq!(extract_literal("Output Value: 0.305"), Some("0.305"));
        assert_eq!(extract_number("HOMO 2 gap: -1.5e-2 eV"), Some(-0.015));
        assert_eq!(extract_number("none"), None);
    }

    #[test]
    fn report_means() {
        let p = vec!["a b c d".to_string(), "x".to_string()];
        let r = vec!["a b c d".to_string(), "y".to_string()];
        let rep = evaluate(&p, &r, &[Metric::Exact, Metric::Lev], true).unwrap();
        assert_eq!(rep.metrics["exact"], 0.5);
        assert_eq!(rep.metrics["lev"], 0.5);
        assert_eq!(Metric::parse_list("bleu, lev").unwrap(), vec![Metric::Bleu, Metric::Lev]);
        assert!(Metric::parse_list("rouge").is_err());
    }

    proptest! {
        #[test]
        fn levenshtein_metric(a in "[abc]{0,8}", b in "[abc]{0,8}", c in "[abc]{0,8}") {
            prop_assert_eq!(levenshtein(&a, &a), 0);
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        }

        #[test]
        fn meteor_bounded(a in "[abc ]{0,16}", b in "[abc ]{0,16}") {
            let p = meteor_parts(&a, &b);
            prop_assert!(p.chunks <= p.matched);
            prop_assert!((0.0..=1.0).contains(&p.score));
            let s = bleu(&a, &b);
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
