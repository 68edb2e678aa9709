//! Template-update suggestion reports, per-card quality scores, and the
//! JSON / CSV / Markdown emitters for tabular outputs.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::WordHistogram;
use crate::mdparse::HeadingPath;
use crate::simmetrics::{match_headings, MatchMetric, MatchThresholds};

/// One word present in both histograms, ranked by the frequency product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonWordEntry {
    pub word: String,
    pub f_left: u64,
    pub f_right: u64,
    pub product: u64,
}

/// Three-way vocabulary partition between a reference template histogram
/// (left) and a corpus histogram (right). `common` is sorted by the
/// frequency product, descending; `left_only` is complete; `right_only_top`
/// is truncated to `top_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordGapReport {
    pub common: Vec<CommonWordEntry>,
    pub left_only: Vec<(String, u64)>,
    pub right_only_top: Vec<(String, u64)>,
    pub top_k: usize,
    pub generated_at: DateTime<Utc>,
    pub inputs: (String, String),
}

/// Separates the two vocabularies into common / left-only / right-only
/// categories. Common entries carry both frequencies and their product.
pub fn gap_report(
    h_left: &WordHistogram,
    h_right: &WordHistogram,
    top_k: usize,
) -> Result<WordGapReport> {
    if h_left.is_empty() || h_right.is_empty() {
        return Err(Error::EmptyInput(
            "gap_report: both histograms must be nonempty".to_string(),
        ));
    }
    let mut common = Vec::new();
    let mut left_only = Vec::new();
    for (word, f_left) in h_left.iter() {
        let f_right = h_right.count(word);
        if f_right > 0 {
            common.push(CommonWordEntry {
                word: word.to_string(),
                f_left,
                f_right,
                product: f_left.saturating_mul(f_right),
            });
        } else {
            left_only.push((word.to_string(), f_left));
        }
    }
    common.sort_by(|a, b| b.product.cmp(&a.product).then_with(|| a.word.cmp(&b.word)));
    left_only.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let right_only_top: Vec<(String, u64)> = h_right
        .sorted_entries()
        .into_iter()
        .filter(|(w, _)| !h_left.contains(w))
        .take(top_k)
        .map(|(w, c)| (w.to_string(), c))
        .collect();
    Ok(WordGapReport {
        common,
        left_only,
        right_only_top,
        top_k,
        generated_at: Utc::now(),
        inputs: (h_left.label().to_string(), h_right.label().to_string()),
    })
}

/// Per-card quality summary. The composite weighting is artifact-defined;
/// all raw components are reported so consumers can re-weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardScore {
    pub model_id: String,
    pub nlss_matches: usize,
    pub nld_matches: usize,
    pub common_word_count: usize,
    pub common_word_frequency: u64,
    pub composite: f64,
}

/// Scores one card against template heading paths and the template
/// histogram: 50 points cap at 5 NLSS heading matches, 25 points cap at 2
/// NLD matches, 25 points proportional to template-vocabulary coverage.
pub fn score_card(
    model_id: impl Into<String>,
    card_paths: &[HeadingPath],
    card_hist: &WordHistogram,
    zd_paths: &[HeadingPath],
    zd_hist: &WordHistogram,
    th: &MatchThresholds,
) -> CardScore {
    let matches = match_headings(card_paths, zd_paths, th);
    let nlss_matches = matches
        .iter()
        .filter(|m| m.matched_by.contains(&MatchMetric::Nlss))
        .count();
    let nld_matches = matches
        .iter()
        .filter(|m| m.matched_by.contains(&MatchMetric::Nld))
        .count();
    let common_word_count = card_hist
        .words()
        .filter(|w| zd_hist.contains(w))
        .count();
    let common_word_frequency: u64 = card_hist
        .iter()
        .filter(|(w, _)| zd_hist.contains(w))
        .map(|(_, c)| c)
        .sum();
    let coverage = if zd_hist.vocabulary_size() == 0 {
        0.0
    } else {
        common_word_count as f64 / zd_hist.vocabulary_size() as f64
    };
    let composite = 50.0 * (nlss_matches as f64 / 5.0).min(1.0)
        + 25.0 * (nld_matches as f64 / 2.0).min(1.0)
        + 25.0 * coverage;
    CardScore {
        model_id: model_id.into(),
        nlss_matches,
        nld_matches,
        common_word_count,
        common_word_frequency,
        composite,
    }
}

/// Scatter / rank data for one cohort member, exported for external
/// plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub model_id: String,
    pub downloads: u64,
    pub common_words: u64,
    pub rank_downloads: f64,
    pub rank_common_words: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub rows: Vec<RankRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Json,
    Csv,
    Markdown,
}

impl EmitFormat {
    pub fn parse(s: &str) -> Result<EmitFormat> {
        match s {
            "json" => Ok(EmitFormat::Json),
            "csv" => Ok(EmitFormat::Csv),
            "markdown" | "md" => Ok(EmitFormat::Markdown),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// Renders a value in one of the interchange formats with stable field
/// order. CSV output is RFC-4180 quoted; Markdown renders pipe tables.
pub trait Emit {
    fn emit(&self, format: EmitFormat) -> Result<String>;
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn csv_from_rows(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(header)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    for row in rows {
        writer
            .write_record(&row)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

fn md_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("| {} |\n", header.join(" | ")));
    out.push_str(&format!(
        "|{}\n",
        header.iter().map(|_| " --- |").collect::<String>()
    ));
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| md_escape(c)).collect();
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    out
}

impl Emit for WordGapReport {
    fn emit(&self, format: EmitFormat) -> Result<String> {
        match format {
            EmitFormat::Json => to_json(self),
            EmitFormat::Csv => {
                let mut rows = Vec::new();
                for e in &self.common {
                    rows.push(vec![
                        "common".to_string(),
                        e.word.clone(),
                        e.f_left.to_string(),
                        e.f_right.to_string(),
                        e.product.to_string(),
                    ]);
                }
                for (w, f) in &self.left_only {
                    rows.push(vec![
                        "left_only".to_string(),
                        w.clone(),
                        f.to_string(),
                        String::new(),
                        String::new(),
                    ]);
                }
                for (w, f) in &self.right_only_top {
                    rows.push(vec![
                        "right_only".to_string(),
                        w.clone(),
                        String::new(),
                        f.to_string(),
                        String::new(),
                    ]);
                }
                csv_from_rows(&["category", "word", "f_left", "f_right", "product"], rows)
            }
            EmitFormat::Markdown => {
                let k = self.top_k;
                let n = self
                    .common
                    .len()
                    .min(k)
                    .max(self.left_only.len().min(k))
                    .max(self.right_only_top.len());
                let cell = |entry: Option<(&str, u64)>| -> String {
                    entry
                        .map(|(w, f)| format!("{w} ({f})"))
                        .unwrap_or_default()
                };
                let rows: Vec<Vec<String>> = (0..n)
                    .map(|i| {
                        vec![
                            self.common
                                .get(i)
                                .map(|e| format!("{} ({}\u{00b7}{})", e.word, e.f_left, e.f_right))
                                .unwrap_or_default(),
                            cell(self.left_only.get(i).map(|(w, f)| (w.as_str(), *f))),
                            cell(self.right_only_top.get(i).map(|(w, f)| (w.as_str(), *f))),
                        ]
                    })
                    .collect();
                Ok(md_table(
                    &[
                        "common word (by f_left*f_right)",
                        "left only",
                        "right only (top)",
                    ],
                    &rows,
                ))
            }
        }
    }
}

impl Emit for CardScore {
    fn emit(&self, format: EmitFormat) -> Result<String> {
        match format {
            EmitFormat::Json => to_json(self),
            EmitFormat::Csv => csv_from_rows(
                &[
                    "model_id",
                    "nlss_matches",
                    "nld_matches",
                    "common_word_count",
                    "common_word_frequency",
                    "composite",
                ],
                vec![vec![
                    self.model_id.clone(),
                    self.nlss_matches.to_string(),
                    self.nld_matches.to_string(),
                    self.common_word_count.to_string(),
                    self.common_word_frequency.to_string(),
                    format!("{:.2}", self.composite),
                ]],
            ),
            EmitFormat::Markdown => Ok(md_table(
                &[
                    "model_id",
                    "nlss_matches",
                    "nld_matches",
                    "common_word_count",
                    "common_word_frequency",
                    "composite",
                ],
                &[vec![
                    self.model_id.clone(),
                    self.nlss_matches.to_string(),
                    self.nld_matches.to_string(),
                    self.common_word_count.to_string(),
                    self.common_word_frequency.to_string(),
                    format!("{:.2}", self.composite),
                ]],
            )),
        }
    }
}

impl Emit for RankTable {
    fn emit(&self, format: EmitFormat) -> Result<String> {
        let header = [
            "model_id",
            "downloads",
            "common_words",
            "rank_downloads",
            "rank_common_words",
        ];
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.model_id.clone(),
                    r.downloads.to_string(),
                    r.common_words.to_string(),
                    format!("{}", r.rank_downloads),
                    format!("{}", r.rank_common_words),
                ]
            })
            .collect();
        match format {
            EmitFormat::Json => to_json(self),
            EmitFormat::Csv => csv_from_rows(&header, rows),
            EmitFormat::Markdown => Ok(md_table(&header, &rows)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdparse::{heading_paths, parse_toc};
    use crate::textprep::{tokenize, FilterConfig};

    fn hist(tokens: &[&str]) -> WordHistogram {
        WordHistogram::from_tokens(tokens.iter().copied(), "test")
    }

    #[test]
    fn gap_report_partitions_vocabulary() {
        let zd = hist(&["a", "a", "b"]);
        let hf = hist(&["a", "a", "a", "c", "c", "c", "c", "c"]);
        let report = gap_report(&zd, &hf, 10).unwrap();
        assert_eq!(report.common.len(), 1);
        let e = &report.common[0];
        assert_eq!((e.word.as_str(), e.f_left, e.f_right, e.product), ("a", 2, 3, 6));
        assert_eq!(report.left_only, vec![("b".to_string(), 1)]);
        assert_eq!(report.right_only_top, vec![("c".to_string(), 5)]);
    }

    #[test]
    fn gap_report_identical_histograms() {
        let h = hist(&["a", "b", "b"]);
        let report = gap_report(&h, &h.clone(), 10).unwrap();
        assert!(report.left_only.is_empty());
        assert!(report.right_only_top.is_empty());
        assert_eq!(report.common.len(), 2);
    }

    #[test]
    fn gap_report_common_sorted_by_product() {
        let zd = hist(&["a", "a", "b", "b", "b", "c"]);
        let hf = hist(&["a", "b", "b", "c", "c", "c", "c", "c", "c", "c"]);
        let report = gap_report(&zd, &hf, 10).unwrap();
        let products: Vec<u64> = report.common.iter().map(|e| e.product).collect();
        let mut sorted = products.clone();
        sorted.sort_by(|x, y| y.cmp(x));
        assert_eq!(products, sorted);
    }

    #[test]
    fn score_empty_card_is_zero() {
        let zd_tree = parse_toc("# T\n## A\n");
        let zd_hist = hist(&["alpha", "beta"]);
        let score = score_card(
            "empty",
            &[],
            &WordHistogram::new("empty"),
            &heading_paths(&zd_tree),
            &zd_hist,
            &MatchThresholds::default(),
        );
        assert_eq!(score.composite, 0.0);
        assert_eq!(score.nlss_matches, 0);
    }

    #[test]
    fn score_identical_card_hits_ceiling() {
        let text = "# Report\n## Data\n## Uses\n### Scope\n## Limits\n### Risks\nalpha beta gamma\n";
        let tree = parse_toc(text);
        let paths = heading_paths(&tree);
        let cfg = FilterConfig::with_builtin_stop_words();
        let h = WordHistogram::from_tokens(tokenize(text, &cfg), "self");
        let score = score_card(
            "self",
            &paths,
            &h,
            &paths,
            &h,
            &MatchThresholds::default(),
        );
        assert_eq!(score.composite, 100.0);
    }

    #[test]
    fn composite_monotone_in_matches() {
        let zd_tree = parse_toc("# Guide\n## Evaluation\n## Uses\n");
        let zd_paths = heading_paths(&zd_tree);
        let zd_hist = hist(&["evaluation", "uses"]);
        let one = heading_paths(&parse_toc("# Guide\n## Evaluation\n"));
        let two = heading_paths(&parse_toc("# Guide\n## Evaluation\n## Uses\n"));
        let h = WordHistogram::new("none");
        let th = MatchThresholds::default();
        let s1 = score_card("a", &one, &h, &zd_paths, &zd_hist, &th);
        let s2 = score_card("a", &two, &h, &zd_paths, &zd_hist, &th);
        assert!(s2.composite >= s1.composite);
    }

    #[test]
    fn emit_json_round_trips() {
        let report = gap_report(&hist(&["a", "b"]), &hist(&["a", "c"]), 5).unwrap();
        let json = report.emit(EmitFormat::Json).unwrap();
        let parsed: WordGapReport = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn emit_csv_quotes_commas() {
        let table = RankTable {
            rows: vec![RankRow {
                model_id: "a,b".to_string(),
                downloads: 3,
                common_words: 1,
                rank_downloads: 1.0,
                rank_common_words: 1.0,
            }],
        };
        let csv = table.emit(EmitFormat::Csv).unwrap();
        assert!(csv.contains("\"a,b\""));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn emit_markdown_top_k_rows() {
        let zd_tokens: Vec<String> = (0..25).map(|i| format!("w{i:02}")).collect();
        let hf_tokens: Vec<String> = (0..25)
            .flat_map(|i| vec![format!("w{i:02}"); i + 1])
            .collect();
        let zd = WordHistogram::from_tokens(zd_tokens, "zd");
        let hf = WordHistogram::from_tokens(hf_tokens, "hf");
        let report = gap_report(&zd, &hf, 20).unwrap();
        let md = report.emit(EmitFormat::Markdown).unwrap();
        // header + separator + 20 data rows
        assert_eq!(md.lines().count(), 22);
        assert_eq!(md.lines().next().unwrap().matches('|').count(), 4);
    }
}
