//! Cohort construction (uniform / top / cluster sampling), download-bin
//! histograms, average-tie ranking, and the reuse-vs-documentation
//! correlation statistics.

use std::collections::{HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::WordHistogram;
use crate::ingest::{CorpusManifest, ModelRecord};

/// A named sampling rule over a corpus manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CohortSpec {
    /// Every `step`-th record of the downloads-descending order.
    Uniform { step: usize },
    /// Records over the download threshold or the likes threshold
    /// (strictly greater), deduplicated.
    Top {
        download_threshold: u64,
        likes_threshold: u64,
    },
    /// For each factor-of-ten download bin intersecting `[lo, hi)`, up to
    /// `samples_per_bin` members drawn with the seeded generator.
    Cluster {
        lo: u64,
        hi: u64,
        samples_per_bin: usize,
        seed: u64,
    },
}

impl CohortSpec {
    fn validate(&self) -> Result<()> {
        match self {
            CohortSpec::Uniform { step } if *step < 1 => Err(Error::InvalidArgument(
                "uniform step must be at least 1".to_string(),
            )),
            CohortSpec::Cluster { lo, hi, .. } if lo >= hi => Err(Error::InvalidArgument(
                "cluster range must satisfy lo < hi".to_string(),
            )),
            CohortSpec::Cluster {
                samples_per_bin, ..
            } if *samples_per_bin < 1 => Err(Error::InvalidArgument(
                "samples_per_bin must be at least 1".to_string(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub spec: CohortSpec,
    pub members: Vec<ModelRecord>,
}

impl Cohort {
    /// Members with a fetched card.
    pub fn documented_members(&self) -> Vec<&ModelRecord> {
        self.members.iter().filter(|r| r.is_documented()).collect()
    }
}

/// One factor-of-ten download bin; `hi` is exclusive, `None` means open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownloadBin {
    pub lo: u64,
    pub hi: Option<u64>,
    pub count: usize,
}

const BIN_EDGES: [u64; 9] = [
    0,
    1,
    10,
    100,
    1_000,
    10_000,
    100_000,
    1_000_000,
    10_000_000,
];

/// Buckets records into the fixed bins {0}, [1,10), [10,100), ...,
/// [10^7, inf). Every record lands in exactly one bin.
pub fn download_bins(records: &[ModelRecord]) -> Vec<DownloadBin> {
    let mut bins: Vec<DownloadBin> = BIN_EDGES
        .iter()
        .enumerate()
        .map(|(i, &lo)| DownloadBin {
            lo,
            hi: BIN_EDGES.get(i + 1).copied(),
            count: 0,
        })
        .collect();
    for record in records {
        let idx = BIN_EDGES
            .iter()
            .rposition(|&edge| record.downloads >= edge)
            .expect("downloads >= 0 always lands in a bin");
        bins[idx].count += 1;
    }
    bins
}

fn sorted_by_downloads(records: &[ModelRecord]) -> Vec<&ModelRecord> {
    let mut sorted: Vec<&ModelRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        b.downloads
            .cmp(&a.downloads)
            .then_with(|| a.model_id.cmp(&b.model_id))
    });
    sorted
}

/// Resolves a sampling rule into its member records. Deterministic given
/// the manifest and spec, including the cluster seed.
pub fn build_cohort(manifest: &CorpusManifest, spec: &CohortSpec) -> Result<Cohort> {
    spec.validate()?;
    if manifest.records.is_empty() {
        return Err(Error::EmptyInput(
            "build_cohort: manifest has no records".to_string(),
        ));
    }
    let members: Vec<ModelRecord> = match spec {
        CohortSpec::Uniform { step } => sorted_by_downloads(&manifest.records)
            .into_iter()
            .step_by(*step)
            .cloned()
            .collect(),
        CohortSpec::Top {
            download_threshold,
            likes_threshold,
        } => sorted_by_downloads(&manifest.records)
            .into_iter()
            .filter(|r| r.downloads > *download_threshold || r.likes > *likes_threshold)
            .cloned()
            .collect(),
        CohortSpec::Cluster {
            lo,
            hi,
            samples_per_bin,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut members = Vec::new();
            let sorted = sorted_by_downloads(&manifest.records);
            for (i, &bin_lo) in BIN_EDGES.iter().enumerate() {
                let bin_hi = BIN_EDGES.get(i + 1).copied().unwrap_or(u64::MAX);
                let draw_lo = bin_lo.max(*lo);
                let draw_hi = bin_hi.min(*hi);
                if draw_lo >= draw_hi {
                    continue;
                }
                let candidates: Vec<&ModelRecord> = sorted
                    .iter()
                    .copied()
                    .filter(|r| r.downloads >= draw_lo && r.downloads < draw_hi)
                    .collect();
                if candidates.len() <= *samples_per_bin {
                    members.extend(candidates.into_iter().cloned());
                } else {
                    let mut picks =
                        rand::seq::index::sample(&mut rng, candidates.len(), *samples_per_bin)
                            .into_vec();
                    picks.sort_unstable();
                    members.extend(picks.into_iter().map(|p| candidates[p].clone()));
                }
            }
            members
        }
    };
    if members.is_empty() {
        return Err(Error::EmptyInput(format!(
            "build_cohort: spec {spec:?} selected no records"
        )));
    }
    Ok(Cohort {
        spec: spec.clone(),
        members,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankDirection {
    /// Rank 1 is the largest value.
    Descending,
}

/// Average-tie ranks: tied values share the mean of the rank positions they
/// cover, so ranks always sum to n(n+1)/2.
pub fn rank(values: &[f64], _direction: RankDirection) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j are 0-based; ranks are 1-based.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation coefficient; `None` when either series has zero
/// variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "series lengths must match");
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return None;
    }
    Some(cov / (var_x.sqrt() * var_y.sqrt()))
}

/// Which word set anchors the per-file similarity series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationReference {
    /// Words common to the template and corpus histograms.
    ZdCommonWords,
    /// The full corpus histogram vocabulary.
    HfHistogram,
}

/// Correlation between reuse indicators and documentation similarity.
/// `rank_vs_rank` correlates average-tie ranks of downloads against ranks
/// of per-file common-word counts; `freq_vs_freq` correlates the raw
/// download counts against raw common-word frequencies. Values are `None`
/// with a note when a series has zero variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rank_vs_rank: Option<f64>,
    pub freq_vs_freq: Option<f64>,
    pub n: usize,
    pub reference: CorrelationReference,
    pub notes: Vec<String>,
}

/// Computes both correlation series over the documented cohort members.
/// Every documented member must have a per-file histogram.
pub fn correlate(
    cohort: &Cohort,
    reference_words: &HashSet<String>,
    per_file: &HashMap<String, WordHistogram>,
    reference: CorrelationReference,
) -> Result<CorrelationResult> {
    let documented = cohort.documented_members();
    if documented.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "correlate: need at least 2 documented members, have {}",
            documented.len()
        )));
    }
    let mut downloads = Vec::with_capacity(documented.len());
    let mut common_counts = Vec::with_capacity(documented.len());
    let mut common_freqs = Vec::with_capacity(documented.len());
    for member in &documented {
        let hist = per_file.get(&member.model_id).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "correlate: no per-file histogram for {}",
                member.model_id
            ))
        })?;
        let count = hist.words().filter(|w| reference_words.contains(*w)).count();
        let freq: u64 = hist
            .iter()
            .filter(|(w, _)| reference_words.contains(*w))
            .map(|(_, c)| c)
            .sum();
        downloads.push(member.downloads as f64);
        common_counts.push(count as f64);
        common_freqs.push(freq as f64);
    }

    let mut notes = Vec::new();
    let rank_vs_rank = pearson(
        &rank(&downloads, RankDirection::Descending),
        &rank(&common_counts, RankDirection::Descending),
    );
    if rank_vs_rank.is_none() {
        notes.push("rank_vs_rank undefined: zero variance in a rank series".to_string());
    }
    let freq_vs_freq = pearson(&downloads, &common_freqs);
    if freq_vs_freq.is_none() {
        notes.push("freq_vs_freq undefined: zero variance in a raw series".to_string());
    }
    Ok(CorrelationResult {
        rank_vs_rank,
        freq_vs_freq,
        n: documented.len(),
        reference,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::FetchStatus;

    fn record(id: &str, downloads: u64, likes: u64) -> ModelRecord {
        let mut r = ModelRecord::listed(id, downloads, likes);
        r.status = FetchStatus::Fetched;
        r.card_path = Some(format!("cards/{id}.md"));
        r
    }

    fn manifest(records: Vec<ModelRecord>) -> CorpusManifest {
        CorpusManifest {
            records,
            batch_count: 1,
            created_at: crate::ingest::epoch(),
            source: crate::ingest::CorpusSource::LocalDir,
        }
    }

    #[test]
    fn bins_classify_each_record_once() {
        let records: Vec<ModelRecord> = [0u64, 5, 50, 500]
            .iter()
            .enumerate()
            .map(|(i, &d)| record(&format!("m{i}"), d, 0))
            .collect();
        let bins = download_bins(&records);
        let counts: Vec<usize> = bins.iter().map(|b| b.count).collect();
        assert_eq!(counts[..4], [1, 1, 1, 1]);
        assert_eq!(counts.iter().sum::<usize>(), records.len());
        assert!(download_bins(&[]).iter().all(|b| b.count == 0));
    }

    #[test]
    fn uniform_takes_every_step_th() {
        let records: Vec<ModelRecord> = (0..10)
            .map(|i| record(&format!("m{i}"), 100 - i as u64, 0))
            .collect();
        let cohort =
            build_cohort(&manifest(records), &CohortSpec::Uniform { step: 3 }).unwrap();
        let downloads: Vec<u64> = cohort.members.iter().map(|m| m.downloads).collect();
        assert_eq!(downloads, vec![100, 97, 94, 91]);
    }

    #[test]
    fn uniform_step_beyond_corpus_keeps_first() {
        let records = vec![record("a", 5, 0), record("b", 9, 0)];
        let cohort =
            build_cohort(&manifest(records), &CohortSpec::Uniform { step: 10 }).unwrap();
        assert_eq!(cohort.members.len(), 1);
        assert_eq!(cohort.members[0].model_id, "b");
    }

    #[test]
    fn uniform_ties_break_by_model_id() {
        let records = vec![record("bb", 7, 0), record("aa", 7, 0), record("cc", 7, 0)];
        let cohort =
            build_cohort(&manifest(records), &CohortSpec::Uniform { step: 1 }).unwrap();
        let ids: Vec<&str> = cohort.members.iter().map(|m| m.model_id.as_str()).collect();
        assert_eq!(ids, vec!["aa", "bb", "cc"]);
    }

    #[test]
    fn top_unions_and_dedupes() {
        let mut records = Vec::new();
        for i in 0..21 {
            records.push(record(&format!("dl{i:02}"), 10_000_001 + i as u64, 0));
        }
        for i in 0..18 {
            records.push(record(&format!("lk{i:02}"), 100, 4001 + i as u64));
        }
        // Two models pass both thresholds.
        records.push(record("both0", 10_000_100, 5000));
        records.push(record("both1", 10_000_101, 5001));
        records.push(record("neither", 100, 100));
        let cohort = build_cohort(
            &manifest(records),
            &CohortSpec::Top {
                download_threshold: 10_000_000,
                likes_threshold: 4000,
            },
        )
        .unwrap();
        assert_eq!(cohort.members.len(), 21 + 18 + 2);
    }

    #[test]
    fn cluster_is_seeded_and_bounded() {
        let records: Vec<ModelRecord> = (0..500)
            .map(|i| record(&format!("m{i:03}"), (i % 90) as u64 + 1, 0))
            .collect();
        let spec = CohortSpec::Cluster {
            lo: 1,
            hi: 100_000,
            samples_per_bin: 20,
            seed: 42,
        };
        let m = manifest(records);
        let a = build_cohort(&m, &spec).unwrap();
        let b = build_cohort(&m, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.members.len() <= 100);
        let ids: HashSet<&str> = a.members.iter().map(|m| m.model_id.as_str()).collect();
        assert_eq!(ids.len(), a.members.len());
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&[30.0, 10.0, 20.0], RankDirection::Descending), vec![
            1.0, 3.0, 2.0
        ]);
        assert_eq!(rank(&[5.0, 5.0, 1.0], RankDirection::Descending), vec![
            1.5, 1.5, 3.0
        ]);
    }

    #[test]
    fn ranks_sum_to_triangular_number() {
        let values = vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0];
        let ranks = rank(&values, RankDirection::Descending);
        let n = values.len() as f64;
        assert!((ranks.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn correlate_perfectly_sorted_series() {
        let records: Vec<ModelRecord> = (0..5)
            .map(|i| record(&format!("m{i}"), 100 - 10 * i as u64, 0))
            .collect();
        let mut per_file = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            // More downloads -> more reference words present.
            let words: Vec<String> = (0..(5 - i)).map(|k| format!("w{k}")).collect();
            per_file.insert(
                r.model_id.clone(),
                WordHistogram::from_tokens(words, r.model_id.clone()),
            );
        }
        let reference: HashSet<String> = (0..5).map(|k| format!("w{k}")).collect();
        let cohort = Cohort {
            spec: CohortSpec::Uniform { step: 1 },
            members: records,
        };
        let result = correlate(
            &cohort,
            &reference,
            &per_file,
            CorrelationReference::ZdCommonWords,
        )
        .unwrap();
        assert!((result.rank_vs_rank.unwrap() - 1.0).abs() < 1e-12);
        assert!((result.freq_vs_freq.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlate_zero_variance_is_sentinel_with_note() {
        let records = vec![record("a", 5, 0), record("b", 5, 0)];
        let mut per_file = HashMap::new();
        for r in &records {
            per_file.insert(
                r.model_id.clone(),
                WordHistogram::from_tokens(["w0"], r.model_id.clone()),
            );
        }
        let reference: HashSet<String> = HashSet::from(["w0".to_string()]);
        let cohort = Cohort {
            spec: CohortSpec::Uniform { step: 1 },
            members: records,
        };
        let result = correlate(
            &cohort,
            &reference,
            &per_file,
            CorrelationReference::HfHistogram,
        )
        .unwrap();
        assert_eq!(result.rank_vs_rank, None);
        assert_eq!(result.freq_vs_freq, None);
        assert_eq!(result.notes.len(), 2);
    }
}
