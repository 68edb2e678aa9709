//! Similarity metrics over heading paths and word histograms: NLSS,
//! generalized Levenshtein distance with its normalized ratio and
//! token-sorted variants, per-subset compliance, and histogram comparison
//! (common words, intersection, cosine, KL divergence).

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::WordHistogram;
use crate::mdparse::HeadingPath;

/// Heading-match thresholds, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchThresholds {
    pub nlss_match: f64,
    pub nld_match: f64,
}

impl Default for MatchThresholds {
    fn default() -> Self {
        MatchThresholds {
            nlss_match: 25.0,
            nld_match: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMetric {
    Nlss,
    Nld,
}

/// One card-heading / template-heading pair that crossed a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadingMatch {
    pub hf_path: HeadingPath,
    pub zd_path: HeadingPath,
    pub common_words: Vec<String>,
    pub nlss: f64,
    pub nld_ratio: f64,
    pub nld_sorted: f64,
    pub matched_by: BTreeSet<MatchMetric>,
}

fn unique_words(s: &str) -> Vec<&str> {
    let mut seen = HashSet::new();
    s.split_whitespace().filter(|w| seen.insert(*w)).collect()
}

fn joined_len(words: &[&str]) -> usize {
    if words.is_empty() {
        return 0;
    }
    let chars: usize = words.iter().map(|w| w.chars().count()).sum();
    chars + words.len() - 1
}

/// NLSS: 100 times the character length of the space-joined common words
/// over the character length of the space-joined unique words of the card
/// path. Word matching is case-sensitive and exact. Returns the score and
/// the common words in card order.
pub fn nlss(s_hf: &str, s_zd: &str) -> Result<(f64, Vec<String>)> {
    let hf_words = unique_words(s_hf);
    if hf_words.is_empty() {
        return Err(Error::EmptyInput(
            "nlss: card heading path has no words".to_string(),
        ));
    }
    let zd_words: HashSet<&str> = s_zd.split_whitespace().collect();
    let common: Vec<&str> = hf_words
        .iter()
        .copied()
        .filter(|w| zd_words.contains(w))
        .collect();
    let v1 = joined_len(&common) as f64;
    let v2 = joined_len(&hf_words) as f64;
    let score = (100.0 * v1 / v2).clamp(0.0, 100.0);
    Ok((score, common.into_iter().map(str::to_string).collect()))
}

/// Generalized Levenshtein distance over characters with costs insertion 1,
/// deletion 1, substitution 2 (the indel-equivalent form matching the ratio
/// semantics of the usual fuzzy token-comparison libraries).
pub fn gld(a: &str, b: &str) -> u64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len() as u64;
    }
    if b.is_empty() {
        return a.len() as u64;
    }
    let mut prev: Vec<u64> = (0..=b.len() as u64).collect();
    let mut cur = vec![0u64; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i as u64 + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + if ca == cb { 0 } else { 2 };
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Normalized Levenshtein similarity: 100 * (1 - GLD / (|a| + |b|)).
/// 100 means equal strings; 0 means no aligned characters.
pub fn nld_ratio(a: &str, b: &str) -> Result<f64> {
    let lensum = char_len(a) + char_len(b);
    if lensum == 0 {
        return Err(Error::EmptyInput(
            "nld_ratio: both strings are empty".to_string(),
        ));
    }
    Ok(100.0 * (1.0 - gld(a, b) as f64 / lensum as f64))
}

/// Token-sort preprocessing: non-alphanumeric characters (underscore kept)
/// become spaces, everything is lowercased, and tokens are rejoined in
/// lexicographic order. This mirrors the token-sort-ratio semantics of the
/// fuzzy comparison library family the thresholds were tuned against.
fn token_sort_key(s: &str) -> String {
    let cleaned: String = s
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '_' {
                c
            } else {
                ' '
            }
        })
        .collect();
    let lower = cleaned.to_lowercase();
    let mut tokens: Vec<&str> = lower.split_whitespace().collect();
    tokens.sort_unstable();
    tokens.join(" ")
}

/// `nld_ratio` applied to the token-sorted forms of both strings, making the
/// score invariant under word permutation.
pub fn nld_sorted(a: &str, b: &str) -> Result<f64> {
    if char_len(a) + char_len(b) == 0 {
        return Err(Error::EmptyInput(
            "nld_sorted: both strings are empty".to_string(),
        ));
    }
    let ka = token_sort_key(a);
    let kb = token_sort_key(b);
    if ka.is_empty() && kb.is_empty() {
        return Ok(0.0);
    }
    nld_ratio(&ka, &kb)
}

/// Evaluates all card/template path pairs and records every pair that
/// crosses either threshold (NLSS, or NLD on the token-sorted score).
/// Output order is card document order, then template order. Paths without
/// words cannot match and are skipped.
pub fn match_headings(
    hf: &[HeadingPath],
    zd: &[HeadingPath],
    th: &MatchThresholds,
) -> Vec<HeadingMatch> {
    let mut out = Vec::new();
    for hf_path in hf {
        if hf_path.text.split_whitespace().next().is_none() {
            continue;
        }
        for zd_path in zd {
            let (nlss_score, common) =
                nlss(&hf_path.text, &zd_path.text).expect("hf path checked nonempty");
            let ratio = nld_ratio(&hf_path.text, &zd_path.text).expect("nonempty pair");
            let sorted = nld_sorted(&hf_path.text, &zd_path.text).expect("nonempty pair");
            let mut matched_by = BTreeSet::new();
            if nlss_score >= th.nlss_match {
                matched_by.insert(MatchMetric::Nlss);
            }
            if sorted >= th.nld_match {
                matched_by.insert(MatchMetric::Nld);
            }
            if !matched_by.is_empty() {
                out.push(HeadingMatch {
                    hf_path: hf_path.clone(),
                    zd_path: zd_path.clone(),
                    common_words: common,
                    nlss: nlss_score,
                    nld_ratio: ratio,
                    nld_sorted: sorted,
                    matched_by,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TocMetric {
    Nlss,
    Nld,
}

impl TocMetric {
    pub fn parse(s: &str) -> Result<TocMetric> {
        match s {
            "nlss" => Ok(TocMetric::Nlss),
            "nld" => Ok(TocMetric::Nld),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// Percentage of cards with at least one heading match under the chosen
/// metric: the per-subset compliance number.
pub fn subset_similarity(
    files: &[Vec<HeadingPath>],
    zd: &[HeadingPath],
    metric: TocMetric,
    th: &MatchThresholds,
) -> Result<f64> {
    if files.is_empty() {
        return Err(Error::EmptyInput(
            "subset_similarity: no files supplied".to_string(),
        ));
    }
    let wanted = match metric {
        TocMetric::Nlss => MatchMetric::Nlss,
        TocMetric::Nld => MatchMetric::Nld,
    };
    let matched = files
        .iter()
        .filter(|paths| {
            match_headings(paths, zd, th)
                .iter()
                .any(|m| m.matched_by.contains(&wanted))
        })
        .count();
    Ok(100.0 * matched as f64 / files.len() as f64)
}

/// How the histogram-intersection number is accumulated over common words.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntersectionMode {
    /// Sum of min(left, right): the standard symmetric intersection kernel.
    #[default]
    Min,
    /// Sum of the left histogram's frequencies over common words.
    LeftFrequencies,
    /// Sum of the right histogram's frequencies over common words.
    RightFrequencies,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    /// Restrict the cosine denominators to the common support instead of
    /// each histogram's full vocabulary.
    pub cosine_common_support_only: bool,
    pub intersection_mode: IntersectionMode,
    /// Add-one smoothing for the KL probabilities.
    pub add_one_smoothing: bool,
}

/// Histogram comparison summary. `kl_left_ref` uses the left histogram as
/// the reference (approximating) distribution, i.e. KLD(right || left);
/// `kl_right_ref` is KLD(left || right). KL values are `None` when the
/// common support is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramComparison {
    pub count_common_words: usize,
    pub count_left_only: usize,
    pub count_right_only: usize,
    pub histogram_intersection: u64,
    pub cosine_similarity: f64,
    pub kl_left_ref: Option<f64>,
    pub kl_right_ref: Option<f64>,
}

/// Compares two nonempty histograms under the paper's metrics. Cosine
/// numerators run over common words; denominators cover each histogram's
/// full vocabulary unless configured otherwise. KL divergences are computed
/// in natural log over the common support, with each histogram normalized
/// by its full-vocabulary total.
pub fn compare_histograms(
    left: &WordHistogram,
    right: &WordHistogram,
    cfg: &CompareConfig,
) -> Result<HistogramComparison> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::EmptyInput(
            "compare_histograms: both histograms must be nonempty".to_string(),
        ));
    }

    let common: Vec<&str> = left.words().filter(|w| right.contains(w)).collect();
    let count_common_words = common.len();
    let count_left_only = left.vocabulary_size() - count_common_words;
    let count_right_only = right.vocabulary_size() - count_common_words;

    let histogram_intersection = common
        .iter()
        .map(|w| match cfg.intersection_mode {
            IntersectionMode::Min => left.count(w).min(right.count(w)),
            IntersectionMode::LeftFrequencies => left.count(w),
            IntersectionMode::RightFrequencies => right.count(w),
        })
        .sum();

    let dot: f64 = common
        .iter()
        .map(|w| left.count(w) as f64 * right.count(w) as f64)
        .sum();
    let norm = |h: &WordHistogram, support: Option<&[&str]>| -> f64 {
        let sum_sq: f64 = match support {
            Some(words) => words.iter().map(|w| (h.count(w) as f64).powi(2)).sum(),
            None => h.iter().map(|(_, c)| (c as f64).powi(2)).sum(),
        };
        sum_sq.sqrt()
    };
    let cosine_similarity = if common.is_empty() {
        0.0
    } else if cfg.cosine_common_support_only {
        dot / (norm(left, Some(&common)) * norm(right, Some(&common)))
    } else {
        dot / (norm(left, None) * norm(right, None))
    };

    let (kl_left_ref, kl_right_ref) = if common.is_empty() {
        (None, None)
    } else {
        let prob = |h: &WordHistogram, w: &str| -> f64 {
            if cfg.add_one_smoothing {
                (h.count(w) + 1) as f64 / (h.total() + h.vocabulary_size() as u64) as f64
            } else {
                h.count(w) as f64 / h.total() as f64
            }
        };
        let mut kl_lr = 0.0; // KLD(left || right)
        let mut kl_rl = 0.0; // KLD(right || left)
        for w in &common {
            let p = prob(left, w);
            let q = prob(right, w);
            kl_lr += p * (p / q).ln();
            kl_rl += q * (q / p).ln();
        }
        (Some(kl_rl), Some(kl_lr))
    };

    Ok(HistogramComparison {
        count_common_words,
        count_left_only,
        count_right_only,
        histogram_intersection,
        cosine_similarity,
        kl_left_ref,
        kl_right_ref,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(tokens: &[&str]) -> WordHistogram {
        WordHistogram::from_tokens(tokens.iter().copied(), "test")
    }

    #[test]
    fn nlss_identical_is_100() {
        let (score, common) = nlss("Evaluation Metric", "Evaluation Metric").unwrap();
        assert_eq!(score, 100.0);
        assert_eq!(common, vec!["Evaluation", "Metric"]);
    }

    #[test]
    fn nlss_disjoint_is_0() {
        let (score, common) = nlss("Alpha Beta", "Gamma").unwrap();
        assert_eq!(score, 0.0);
        assert!(common.is_empty());
    }

    #[test]
    fn nlss_empty_card_path_errors() {
        assert!(nlss("", "Gamma").is_err());
        assert!(nlss("   ", "Gamma").is_err());
    }

    #[test]
    fn nlss_case_sensitive() {
        let (score, common) = nlss("use", "Use").unwrap();
        assert_eq!(score, 0.0);
        assert!(common.is_empty());
    }

    #[test]
    fn gld_examples() {
        assert_eq!(gld("abc", "abc"), 0);
        assert_eq!(gld("kitten", "sitting"), 5);
        assert_eq!(gld("", "abc"), 3);
    }

    #[test]
    fn nld_ratio_examples() {
        assert_eq!(nld_ratio("abc", "abc").unwrap(), 100.0);
        let v = nld_ratio("kitten", "sitting").unwrap();
        assert!((v - 100.0 * (1.0 - 5.0 / 13.0)).abs() < 1e-12);
        assert!(nld_ratio("", "").is_err());
    }

    #[test]
    fn nld_sorted_permutation_invariant() {
        assert_eq!(
            nld_sorted("use out-of-scope", "out-of-scope use").unwrap(),
            100.0
        );
        assert_eq!(nld_sorted("a b", "a b").unwrap(), 100.0);
    }

    #[test]
    fn nld_sorted_all_punctuation_is_zero() {
        assert_eq!(nld_sorted("!!!", "???").unwrap(), 0.0);
    }

    fn paths(texts: &[&str]) -> Vec<HeadingPath> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| HeadingPath {
                text: t.to_string(),
                node_index: i,
            })
            .collect()
    }

    #[test]
    fn match_headings_empty_input() {
        let zd = paths(&["Evaluation"]);
        assert!(match_headings(&[], &zd, &MatchThresholds::default()).is_empty());
    }

    #[test]
    fn match_headings_identical_matches_both_ways() {
        let hf = paths(&["Evaluation"]);
        let zd = paths(&["Evaluation"]);
        let matches = match_headings(&hf, &zd, &MatchThresholds::default());
        assert_eq!(matches.len(), 1);
        assert!(matches[0].matched_by.contains(&MatchMetric::Nlss));
        assert!(matches[0].matched_by.contains(&MatchMetric::Nld));
    }

    #[test]
    fn subset_similarity_counts_files_with_any_match() {
        let zd = paths(&["Evaluation"]);
        let files = vec![
            paths(&["Evaluation"]),
            paths(&["Unrelated Heading"]),
            paths(&["Another One"]),
        ];
        let sim = subset_similarity(&files, &zd, TocMetric::Nlss, &MatchThresholds::default())
            .unwrap();
        assert!((sim - 100.0 / 3.0).abs() < 1e-9);
        let all = vec![paths(&["Evaluation"]); 4];
        let sim = subset_similarity(&all, &zd, TocMetric::Nlss, &MatchThresholds::default())
            .unwrap();
        assert_eq!(sim, 100.0);
        assert!(subset_similarity(&[], &zd, TocMetric::Nlss, &MatchThresholds::default()).is_err());
    }

    #[test]
    fn compare_identical_histograms() {
        let h = hist(&["a", "a", "b"]);
        let cmp = compare_histograms(&h, &h, &CompareConfig::default()).unwrap();
        assert!((cmp.cosine_similarity - 1.0).abs() < 1e-12);
        assert_eq!(cmp.kl_left_ref, Some(0.0));
        assert_eq!(cmp.kl_right_ref, Some(0.0));
        assert_eq!(cmp.histogram_intersection, h.total());
    }

    #[test]
    fn compare_worked_example() {
        let h1 = hist(&["a", "b"]);
        let h2 = hist(&["a", "c"]);
        let cmp = compare_histograms(&h1, &h2, &CompareConfig::default()).unwrap();
        assert_eq!(cmp.count_common_words, 1);
        assert_eq!(cmp.histogram_intersection, 1);
        assert!((cmp.cosine_similarity - 0.5).abs() < 1e-12);
        assert_eq!(cmp.count_left_only, 1);
        assert_eq!(cmp.count_right_only, 1);
    }

    #[test]
    fn compare_empty_common_support() {
        let h1 = hist(&["a"]);
        let h2 = hist(&["b"]);
        let cmp = compare_histograms(&h1, &h2, &CompareConfig::default()).unwrap();
        assert_eq!(cmp.cosine_similarity, 0.0);
        assert_eq!(cmp.kl_left_ref, None);
        assert_eq!(cmp.kl_right_ref, None);
    }

    #[test]
    fn compare_rejects_empty_histogram() {
        let h = hist(&["a"]);
        assert!(compare_histograms(&h, &WordHistogram::new(""), &CompareConfig::default()).is_err());
    }

    #[test]
    fn kl_is_asymmetric() {
        let h1 = hist(&["a", "a", "a", "b"]);
        let h2 = hist(&["a", "a", "b", "b"]);
        let cmp = compare_histograms(&h1, &h2, &CompareConfig::default()).unwrap();
        let (l, r) = (cmp.kl_left_ref.unwrap(), cmp.kl_right_ref.unwrap());
        assert!((l - r).abs() > 1e-9, "expected asymmetry, got {l} vs {r}");
    }

    #[test]
    fn one_sided_intersection_modes() {
        let h1 = hist(&["a", "a", "a"]);
        let h2 = hist(&["a"]);
        let min = compare_histograms(&h1, &h2, &CompareConfig::default()).unwrap();
        assert_eq!(min.histogram_intersection, 1);
        let left = compare_histograms(
            &h1,
            &h2,
            &CompareConfig {
                intersection_mode: IntersectionMode::LeftFrequencies,
                ..CompareConfig::default()
            },
        )
        .unwrap();
        assert_eq!(left.histogram_intersection, 3);
    }
}
