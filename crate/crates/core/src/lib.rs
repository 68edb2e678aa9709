//! # cardgauge
//!
//! A library and CLI that quantifies how well AI model cards align with
//! reference documentation templates.
//!
//! The toolchain covers the whole workflow: ingesting model listings and
//! README documents from a hub API (or a local tree) into a resumable
//! corpus store, extracting table-of-contents trees from Markdown,
//! scoring heading alignment with NLSS and normalized-Levenshtein
//! metrics, building filtered word histograms at corpus scale, comparing
//! histograms with cosine/KL metrics, assembling download-based cohorts,
//! correlating documentation quality with reuse indicators, and emitting
//! template-update suggestion reports.
//!
//! ## Modules
//!
//! - [`ingest`] - hub client, corpus store, manifest building
//! - [`mdparse`] - TOC trees, heading paths, DOT/JSON export
//! - [`textprep`] - the token filtering pipeline and stop-word lists
//! - [`histogram`] - exact word histograms with a TSV interchange format
//! - [`simmetrics`] - NLSS / GLD / NLD metrics and histogram comparison
//! - [`cohort`] - cohort sampling, ranking, correlation statistics
//! - [`report`] - gap reports, card scores, JSON/CSV/Markdown emitters
//! - [`pipeline`] - staged end-to-end runs with no-op reruns

pub mod cohort;
pub mod error;
pub mod histogram;
pub mod ingest;
pub mod mdparse;
pub mod pipeline;
pub mod report;
mod scan;
pub mod simmetrics;
pub mod textprep;

pub use error::{Error, Result};
pub use histogram::WordHistogram;
pub use mdparse::{heading_paths, parse_toc, HeadingPath, TocNode, TocTree};
pub use simmetrics::{
    compare_histograms, gld, match_headings, nld_ratio, nld_sorted, nlss, subset_similarity,
    HistogramComparison, MatchThresholds,
};
pub use textprep::{tokenize, FilterConfig};
