//! Exact word histograms over card corpora and reference templates, with a
//! deterministic TSV interchange format.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A word -> count map with a cached total. Counts are 64-bit: the full-hub
/// histogram total does not fit 32 bits comfortably. Equality ignores the
/// provenance label.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct WordHistogram {
    counts: HashMap<String, u64>,
    total: u64,
    label: String,
}

impl PartialEq for WordHistogram {
    fn eq(&self, other: &Self) -> bool {
        self.counts == other.counts
    }
}

impl WordHistogram {
    pub fn new(label: impl Into<String>) -> Self {
        WordHistogram {
            counts: HashMap::new(),
            total: 0,
            label: label.into(),
        }
    }

    /// Counts every token in the stream; an empty stream yields an empty
    /// histogram.
    pub fn from_tokens<I, S>(tokens: I, label: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut h = WordHistogram::new(label);
        for t in tokens {
            h.add(t.into());
        }
        h
    }

    pub fn add(&mut self, word: String) {
        *self.counts.entry(word).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.counts.contains_key(word)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn vocabulary_size(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, c)| (w.as_str(), *c))
    }

    /// Entries in the canonical order: count descending, then word ascending.
    pub fn sorted_entries(&self) -> Vec<(&str, u64)> {
        let mut entries: Vec<(&str, u64)> = self.iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        entries
    }

    /// First `k` entries in the canonical order; fewer if the vocabulary is
    /// smaller.
    pub fn top_k(&self, k: usize) -> Vec<(&str, u64)> {
        let mut entries = self.sorted_entries();
        entries.truncate(k);
        entries
    }

    /// Pointwise sum of the parts; labels concatenate as provenance.
    pub fn merge<'a, I>(parts: I) -> WordHistogram
    where
        I: IntoIterator<Item = &'a WordHistogram>,
    {
        let mut labels = Vec::new();
        let mut out = WordHistogram::new("");
        for part in parts {
            if !part.label.is_empty() {
                labels.push(part.label.clone());
            }
            for (word, count) in &part.counts {
                *out.counts.entry(word.clone()).or_insert(0) += count;
            }
            out.total += part.total;
        }
        out.label = labels.join("+");
        out
    }

    /// Writes `word<TAB>count` lines, UTF-8, LF, sorted by count descending
    /// then word ascending. The label is provenance only and not persisted.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (word, count) in self.sorted_entries() {
            if word.contains('\t') || word.contains('\n') {
                return Err(Error::InvalidArgument(format!(
                    "word {word:?} contains a tab or newline and cannot be saved as TSV"
                )));
            }
            writeln!(w, "{word}\t{count}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Loads a TSV histogram, enforcing the no-zero-count and unique-word
    /// invariants. The label becomes the file name.
    pub fn load(path: &Path) -> Result<WordHistogram> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let label = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut h = WordHistogram::new(label);
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            let (word, count) = line.split_once('\t').ok_or_else(|| Error::MalformedLine {
                path: path.to_path_buf(),
                line: lineno,
                reason: "expected word<TAB>count".to_string(),
            })?;
            let count: u64 = count.parse().map_err(|_| Error::MalformedLine {
                path: path.to_path_buf(),
                line: lineno,
                reason: format!("invalid count {count:?}"),
            })?;
            if count == 0 {
                return Err(Error::MalformedLine {
                    path: path.to_path_buf(),
                    line: lineno,
                    reason: format!("zero count for word {word:?}"),
                });
            }
            if h.counts.insert(word.to_string(), count).is_some() {
                return Err(Error::MalformedLine {
                    path: path.to_path_buf(),
                    line: lineno,
                    reason: format!("duplicate word {word:?}"),
                });
            }
            h.total += count;
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(tokens: &[&str]) -> WordHistogram {
        WordHistogram::from_tokens(tokens.iter().copied(), "test")
    }

    #[test]
    fn counts_multiplicities() {
        let h = hist(&["a", "b", "a"]);
        assert_eq!(h.count("a"), 2);
        assert_eq!(h.count("b"), 1);
        assert_eq!(h.total(), 3);
    }

    #[test]
    fn empty_stream_empty_histogram() {
        let h = hist(&[]);
        assert_eq!(h.total(), 0);
        assert_eq!(h.vocabulary_size(), 0);
    }

    #[test]
    fn merge_sums_pointwise() {
        let merged = WordHistogram::merge([&hist(&["a", "a"]), &hist(&["a", "a", "a", "b"])]);
        assert_eq!(merged.count("a"), 5);
        assert_eq!(merged.count("b"), 1);
        assert_eq!(merged.total(), 6);
    }

    #[test]
    fn merge_identity_element() {
        let h = hist(&["a", "b"]);
        let merged = WordHistogram::merge([&h, &WordHistogram::new("")]);
        assert_eq!(merged, h);
    }

    #[test]
    fn tie_break_is_lexicographic() {
        let h = hist(&["b", "b", "a", "a"]);
        assert_eq!(h.sorted_entries(), vec![("a", 2), ("b", 2)]);
    }

    #[test]
    fn top_k_truncates() {
        let h = hist(&["a", "a", "a", "a", "a", "b", "b", "b", "c", "c", "c"]);
        assert_eq!(h.top_k(2), vec![("a", 5), ("b", 3)]);
        assert_eq!(hist(&[]).top_k(10), vec![]);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.tsv");
        let h = hist(&["b", "b", "a", "c", "c", "c"]);
        h.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "c\t3\nb\t2\na\t1\n");
        assert_eq!(WordHistogram::load(&path).unwrap(), h);
    }

    #[test]
    fn load_rejects_zero_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.tsv");
        std::fs::write(&path, "a\t0\n").unwrap();
        let err = WordHistogram::load(&path).unwrap_err();
        assert!(err.to_string().contains(":1:"), "{err}");
    }

    #[test]
    fn load_rejects_duplicates_and_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let dup = dir.path().join("dup.tsv");
        std::fs::write(&dup, "a\t1\na\t2\n").unwrap();
        assert!(WordHistogram::load(&dup).is_err());
        let bad = dir.path().join("bad.tsv");
        std::fs::write(&bad, "a 1\n").unwrap();
        assert!(WordHistogram::load(&bad).is_err());
    }
}
