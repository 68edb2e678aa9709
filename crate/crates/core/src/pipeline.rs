//! The end-to-end workflow: ingest -> toc -> hist -> compare -> cohort ->
//! correlate -> suggest. Each stage declares its inputs, hashes them, and
//! is skipped on rerun when nothing changed, so incremental re-runs of an
//! expensive corpus are cheap no-ops.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cohort::{build_cohort, correlate, Cohort, CohortSpec, CorrelationReference};
use crate::error::{Error, Result};
use crate::histogram::WordHistogram;
use crate::ingest::hub::{fetch_corpus, FetchOptions, HubClient, HubConfig};
use crate::ingest::{
    build_manifest, import_local_dir, load_manifest, CorpusManifest, CorpusSource, CorpusStore,
};
use crate::mdparse::{heading_paths, parse_toc};
use crate::report::{gap_report, Emit, EmitFormat, RankRow, RankTable};
use crate::simmetrics::{compare_histograms, CompareConfig, MatchThresholds};
use crate::textprep::{load_stop_words, tokenize, FilterConfig, StopWordSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterOptions {
    /// `builtin` or a path to a one-word-per-line file.
    pub stop_words: String,
    pub max_x_occurrences: usize,
    pub lowercase: bool,
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions {
            stop_words: "builtin".to_string(),
            max_x_occurrences: 2,
            lowercase: true,
        }
    }
}

impl FilterOptions {
    pub fn to_filter_config(&self) -> Result<FilterConfig> {
        let stop_words = load_stop_words(&StopWordSource::parse(&self.stop_words))?;
        Ok(FilterConfig {
            stop_words,
            max_x_occurrences: self.max_x_occurrences,
            lowercase: self.lowercase,
            strip_markdown: true,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortOptions {
    /// uniform | top | cluster
    pub kind: String,
    pub step: usize,
    pub download_threshold: u64,
    pub likes_threshold: u64,
    pub range_lo: u64,
    pub range_hi: u64,
    pub per_bin: usize,
}

impl Default for CohortOptions {
    fn default() -> Self {
        CohortOptions {
            kind: "uniform".to_string(),
            step: 100_000,
            download_threshold: 10_000_000,
            likes_threshold: 4_000,
            range_lo: 1,
            range_hi: 100_000,
            per_bin: 20,
        }
    }
}

impl CohortOptions {
    pub fn to_spec(&self, seed: u64) -> Result<CohortSpec> {
        match self.kind.as_str() {
            "uniform" => Ok(CohortSpec::Uniform { step: self.step }),
            "top" => Ok(CohortSpec::Top {
                download_threshold: self.download_threshold,
                likes_threshold: self.likes_threshold,
            }),
            "cluster" => Ok(CohortSpec::Cluster {
                lo: self.range_lo,
                hi: self.range_hi,
                samples_per_bin: self.per_bin,
                seed,
            }),
            other => Err(Error::Config(format!("unknown cohort kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceChoice {
    ZdCommon,
    HfAll,
}

/// Everything a pipeline run needs; serializable to a commented TOML file
/// and overridable by CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub endpoint: Option<String>,
    pub card_url_template: Option<String>,
    pub local_dir: Option<PathBuf>,
    pub corpus_dir: PathBuf,
    pub output_dir: PathBuf,
    pub template_path: Option<PathBuf>,
    pub batches: usize,
    pub seed: u64,
    pub cutoff_bytes: u64,
    pub pace_ms: u64,
    pub workers: usize,
    pub page_size: usize,
    pub top_k: usize,
    pub reference: ReferenceChoice,
    pub thresholds: MatchThresholds,
    pub filter: FilterOptions,
    pub cohort: CohortOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            endpoint: None,
            card_url_template: None,
            local_dir: None,
            corpus_dir: PathBuf::from("corpus"),
            output_dir: PathBuf::from("out"),
            template_path: None,
            batches: crate::ingest::DEFAULT_BATCH_COUNT,
            seed: 7,
            cutoff_bytes: crate::ingest::DEFAULT_SIZE_CUTOFF_BYTES,
            pace_ms: 500,
            workers: 4,
            page_size: 500,
            top_k: 20,
            reference: ReferenceChoice::ZdCommon,
            thresholds: MatchThresholds::default(),
            filter: FilterOptions::default(),
            cohort: CohortOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Toc,
    Hist,
    Compare,
    Cohort,
    Correlate,
    Suggest,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Toc,
        Stage::Hist,
        Stage::Compare,
        Stage::Cohort,
        Stage::Correlate,
        Stage::Suggest,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Toc => "toc",
            Stage::Hist => "hist",
            Stage::Compare => "compare",
            Stage::Cohort => "cohort",
            Stage::Correlate => "correlate",
            Stage::Suggest => "suggest",
        }
    }

    pub fn parse(s: &str) -> Result<Stage> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: Stage,
    pub skipped: bool,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct PipelineState {
    stages: BTreeMap<String, StageState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StageState {
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Digest over every stored card: relative path plus content hash, in
/// manifest order.
fn cards_digest(manifest: &CorpusManifest, corpus_dir: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    for record in &manifest.records {
        if let Some(rel) = &record.card_path {
            let abs = corpus_dir.join(rel);
            let bytes = std::fs::read(&abs).map_err(|e| Error::io(&abs, e))?;
            hasher.update(rel.as_bytes());
            hasher.update([0u8]);
            hasher.update(Sha256::digest(&bytes));
        }
    }
    Ok(hex::encode(hasher.finalize()))
}

/// The artifact written by the cohort stage; carries the corpus root so the
/// correlate stage can find card files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortArtifact {
    pub corpus_root: PathBuf,
    pub cohort: Cohort,
}

struct PipelineCtx<'a> {
    cfg: &'a RunConfig,
}

impl PipelineCtx<'_> {
    fn manifest_path(&self) -> PathBuf {
        self.cfg.corpus_dir.join("manifest.jsonl")
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn require_input(&self, stage: Stage, path: &Path, producer: Stage) -> Result<()> {
        if !path.exists() {
            return Err(Error::MissingPrerequisite {
                stage: stage.name().to_string(),
                path: path.to_path_buf(),
                producer: producer.name().to_string(),
            });
        }
        Ok(())
    }

    /// Declared inputs of a stage as (label, content hash) pairs. Missing
    /// prerequisite artifacts surface here, naming the stage to run first.
    fn stage_inputs(&self, stage: Stage) -> Result<BTreeMap<String, String>> {
        fn add_file(inputs: &mut BTreeMap<String, String>, label: &str, path: &Path) -> Result<()> {
            inputs.insert(label.to_string(), hash_file(path)?);
            Ok(())
        }
        let mut inputs = BTreeMap::new();
        match stage {
            Stage::Ingest => {
                if let Some(local) = &self.cfg.local_dir {
                    let meta = local.join("metadata.jsonl");
                    if !meta.exists() {
                        return Err(Error::Config(format!(
                            "local corpus {} has no metadata.jsonl",
                            local.display()
                        )));
                    }
                    add_file(&mut inputs, "local_metadata", &meta)?;
                }
                inputs.insert("cutoff_bytes".to_string(), self.cfg.cutoff_bytes.to_string());
                inputs.insert("batches".to_string(), self.cfg.batches.to_string());
            }
            Stage::Toc => {
                self.require_input(stage, &self.manifest_path(), Stage::Ingest)?;
                add_file(&mut inputs, "manifest", &self.manifest_path())?;
                let manifest = load_manifest(&self.cfg.corpus_dir)?;
                inputs.insert(
                    "cards".to_string(),
                    cards_digest(&manifest, &self.cfg.corpus_dir)?,
                );
            }
            Stage::Hist => {
                self.require_input(stage, &self.manifest_path(), Stage::Ingest)?;
                add_file(&mut inputs, "manifest", &self.manifest_path())?;
                let manifest = load_manifest(&self.cfg.corpus_dir)?;
                inputs.insert(
                    "cards".to_string(),
                    cards_digest(&manifest, &self.cfg.corpus_dir)?,
                );
                if let StopWordSource::File(path) =
                    StopWordSource::parse(&self.cfg.filter.stop_words)
                {
                    add_file(&mut inputs, "stop_words", &path)?;
                }
                if let Some(template) = &self.cfg.template_path {
                    add_file(&mut inputs, "template", template)?;
                }
                inputs.insert(
                    "filter".to_string(),
                    format!(
                        "{}:{}:{}",
                        self.cfg.filter.stop_words,
                        self.cfg.filter.max_x_occurrences,
                        self.cfg.filter.lowercase
                    ),
                );
            }
            Stage::Compare => {
                self.require_input(stage, &self.out("hf.tsv"), Stage::Hist)?;
                self.require_input(stage, &self.out("zd.tsv"), Stage::Hist)?;
                add_file(&mut inputs, "hf", &self.out("hf.tsv"))?;
                add_file(&mut inputs, "zd", &self.out("zd.tsv"))?;
            }
            Stage::Cohort => {
                self.require_input(stage, &self.manifest_path(), Stage::Ingest)?;
                add_file(&mut inputs, "manifest", &self.manifest_path())?;
                let spec = self.cfg.cohort.to_spec(self.cfg.seed)?;
                inputs.insert(
                    "spec".to_string(),
                    serde_json::to_string(&spec).map_err(|e| Error::Config(e.to_string()))?,
                );
            }
            Stage::Correlate => {
                self.require_input(stage, &self.out("cohort.json"), Stage::Cohort)?;
                self.require_input(stage, &self.out("hf.tsv"), Stage::Hist)?;
                add_file(&mut inputs, "cohort", &self.out("cohort.json"))?;
                add_file(&mut inputs, "hf", &self.out("hf.tsv"))?;
                if self.cfg.reference == ReferenceChoice::ZdCommon {
                    self.require_input(stage, &self.out("zd.tsv"), Stage::Hist)?;
                    add_file(&mut inputs, "zd", &self.out("zd.tsv"))?;
                }
                inputs.insert(
                    "reference".to_string(),
                    format!("{:?}", self.cfg.reference),
                );
            }
            Stage::Suggest => {
                self.require_input(stage, &self.out("zd.tsv"), Stage::Hist)?;
                self.require_input(stage, &self.out("hf.tsv"), Stage::Hist)?;
                add_file(&mut inputs, "zd", &self.out("zd.tsv"))?;
                add_file(&mut inputs, "hf", &self.out("hf.tsv"))?;
                inputs.insert("top_k".to_string(), self.cfg.top_k.to_string());
            }
        }
        Ok(inputs)
    }

    fn run_stage(&self, stage: Stage) -> Result<Vec<PathBuf>> {
        match stage {
            Stage::Ingest => self.run_ingest(),
            Stage::Toc => self.run_toc(),
            Stage::Hist => self.run_hist(),
            Stage::Compare => self.run_compare(),
            Stage::Cohort => self.run_cohort(),
            Stage::Correlate => self.run_correlate(),
            Stage::Suggest => self.run_suggest(),
        }
    }

    fn run_ingest(&self) -> Result<Vec<PathBuf>> {
        let cfg = self.cfg;
        match (&cfg.local_dir, &cfg.endpoint) {
            (Some(local), _) => {
                // Re-imports start from a clean journal so stale records
                // cannot leak into the rebuilt manifest.
                let journal = cfg.corpus_dir.join("journal.jsonl");
                if journal.exists() {
                    std::fs::remove_file(&journal).map_err(|e| Error::io(&journal, e))?;
                }
                let store = CorpusStore::create(&cfg.corpus_dir)?;
                import_local_dir(local, &store, cfg.cutoff_bytes)?;
                build_manifest(&cfg.corpus_dir, cfg.batches, CorpusSource::LocalDir)?;
            }
            (None, Some(endpoint)) => {
                let card_url = cfg.card_url_template.clone().ok_or_else(|| {
                    Error::Config("endpoint mode needs card_url_template".to_string())
                })?;
                let mut hub = HubConfig::new(endpoint.clone(), card_url);
                hub.page_size = cfg.page_size;
                hub.pace_ms = cfg.pace_ms;
                hub.concurrency = cfg.workers;
                hub.token = std::env::var("CARDGAUGE_TOKEN").ok();
                let client = HubClient::new(hub)?;
                let store = CorpusStore::create(&cfg.corpus_dir)?;
                fetch_corpus(
                    &client,
                    &store,
                    &FetchOptions {
                        size_cutoff_bytes: cfg.cutoff_bytes,
                        batch_count: cfg.batches,
                        resume: true,
                    },
                )?;
            }
            (None, None) => {
                return Err(Error::Config(
                    "ingest needs either local_dir or endpoint".to_string(),
                ))
            }
        }
        Ok(vec![self.manifest_path()])
    }

    fn run_toc(&self) -> Result<Vec<PathBuf>> {
        let manifest = load_manifest(&self.cfg.corpus_dir)?;
        let out_path = self.out("toc_paths.jsonl");
        let mut out = String::new();
        for record in &manifest.records {
            let Some(rel) = &record.card_path else {
                continue;
            };
            let abs = self.cfg.corpus_dir.join(rel);
            let text = std::fs::read(&abs)
                .map(|b| String::from_utf8_lossy(&b).into_owned())
                .map_err(|e| Error::io(&abs, e))?;
            let paths: Vec<String> = heading_paths(&parse_toc(&text))
                .into_iter()
                .map(|p| p.text)
                .collect();
            let line = serde_json::json!({"model_id": record.model_id, "paths": paths});
            out.push_str(&line.to_string());
            out.push('\n');
        }
        std::fs::write(&out_path, out).map_err(|e| Error::io(&out_path, e))?;
        Ok(vec![out_path])
    }

    fn run_hist(&self) -> Result<Vec<PathBuf>> {
        let manifest = load_manifest(&self.cfg.corpus_dir)?;
        let filter = self.cfg.filter.to_filter_config()?;
        let corpus = corpus_histogram(
            &manifest,
            &self.cfg.corpus_dir,
            &filter,
            self.cfg.workers.max(1),
        )?;
        let hf_path = self.out("hf.tsv");
        corpus.save(&hf_path)?;
        let mut outputs = vec![hf_path];
        if let Some(template) = &self.cfg.template_path {
            let text = std::fs::read_to_string(template).map_err(|e| Error::io(template, e))?;
            let zd = WordHistogram::from_tokens(tokenize(&text, &filter), "zd");
            let zd_path = self.out("zd.tsv");
            zd.save(&zd_path)?;
            outputs.push(zd_path);
        }
        Ok(outputs)
    }

    fn run_compare(&self) -> Result<Vec<PathBuf>> {
        let zd = WordHistogram::load(&self.out("zd.tsv"))?;
        let hf = WordHistogram::load(&self.out("hf.tsv"))?;
        let comparison = compare_histograms(&zd, &hf, &CompareConfig::default())?;
        let out_path = self.out("comparison.json");
        let body = serde_json::json!({
            "left": "zd.tsv",
            "right": "hf.tsv",
            "comparison": comparison,
        });
        let text = serde_json::to_string_pretty(&body)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        std::fs::write(&out_path, format!("{text}\n")).map_err(|e| Error::io(&out_path, e))?;
        Ok(vec![out_path])
    }

    fn run_cohort(&self) -> Result<Vec<PathBuf>> {
        let manifest = load_manifest(&self.cfg.corpus_dir)?;
        let spec = self.cfg.cohort.to_spec(self.cfg.seed)?;
        let cohort = build_cohort(&manifest, &spec)?;
        let artifact = CohortArtifact {
            corpus_root: self.cfg.corpus_dir.clone(),
            cohort,
        };
        let out_path = self.out("cohort.json");
        let text = serde_json::to_string_pretty(&artifact)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        std::fs::write(&out_path, format!("{text}\n")).map_err(|e| Error::io(&out_path, e))?;
        Ok(vec![out_path])
    }

    fn run_correlate(&self) -> Result<Vec<PathBuf>> {
        let artifact_path = self.out("cohort.json");
        let text =
            std::fs::read_to_string(&artifact_path).map_err(|e| Error::io(&artifact_path, e))?;
        let artifact: CohortArtifact =
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let hf = WordHistogram::load(&self.out("hf.tsv"))?;
        let (reference_words, reference): (HashSet<String>, CorrelationReference) =
            match self.cfg.reference {
                ReferenceChoice::ZdCommon => {
                    let zd = WordHistogram::load(&self.out("zd.tsv"))?;
                    let common = zd
                        .words()
                        .filter(|w| hf.contains(w))
                        .map(str::to_string)
                        .collect();
                    (common, CorrelationReference::ZdCommonWords)
                }
                ReferenceChoice::HfAll => (
                    hf.words().map(str::to_string).collect(),
                    CorrelationReference::HfHistogram,
                ),
            };
        let filter = self.cfg.filter.to_filter_config()?;
        let per_file = per_file_histograms(&artifact, &filter)?;
        let result = correlate(&artifact.cohort, &reference_words, &per_file, reference)?;

        let out_path = self.out("correlation.json");
        let text = serde_json::to_string_pretty(&result)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        std::fs::write(&out_path, format!("{text}\n")).map_err(|e| Error::io(&out_path, e))?;

        let rank_table = rank_pairs(&artifact.cohort, &reference_words, &per_file);
        let csv_path = self.out("rank_pairs.csv");
        std::fs::write(&csv_path, rank_table.emit(EmitFormat::Csv)?)
            .map_err(|e| Error::io(&csv_path, e))?;
        Ok(vec![out_path, csv_path])
    }

    fn run_suggest(&self) -> Result<Vec<PathBuf>> {
        let zd = WordHistogram::load(&self.out("zd.tsv"))?;
        let hf = WordHistogram::load(&self.out("hf.tsv"))?;
        let report = gap_report(&zd, &hf, self.cfg.top_k)?;
        let out_path = self.out("suggestions.json");
        std::fs::write(&out_path, report.emit(EmitFormat::Json)?)
            .map_err(|e| Error::io(&out_path, e))?;
        Ok(vec![out_path])
    }
}

/// Tokenizes every documented cohort member's card.
pub fn per_file_histograms(
    artifact: &CohortArtifact,
    filter: &FilterConfig,
) -> Result<std::collections::HashMap<String, WordHistogram>> {
    let mut per_file = std::collections::HashMap::new();
    for member in artifact.cohort.documented_members() {
        let rel = member
            .card_path
            .as_ref()
            .expect("documented member has a card path");
        let abs = artifact.corpus_root.join(rel);
        let bytes = std::fs::read(&abs).map_err(|e| Error::io(&abs, e))?;
        let text = String::from_utf8_lossy(&bytes);
        per_file.insert(
            member.model_id.clone(),
            WordHistogram::from_tokens(tokenize(&text, filter), member.model_id.clone()),
        );
    }
    Ok(per_file)
}

/// Download/common-word rank pairs for scatter plotting.
pub fn rank_pairs(
    cohort: &Cohort,
    reference_words: &HashSet<String>,
    per_file: &std::collections::HashMap<String, WordHistogram>,
) -> RankTable {
    use crate::cohort::{rank, RankDirection};
    let documented = cohort.documented_members();
    let downloads: Vec<f64> = documented.iter().map(|m| m.downloads as f64).collect();
    let commons: Vec<f64> = documented
        .iter()
        .map(|m| {
            per_file
                .get(&m.model_id)
                .map(|h| h.words().filter(|w| reference_words.contains(*w)).count() as f64)
                .unwrap_or(0.0)
        })
        .collect();
    let rank_dl = rank(&downloads, RankDirection::Descending);
    let rank_cw = rank(&commons, RankDirection::Descending);
    RankTable {
        rows: documented
            .iter()
            .enumerate()
            .map(|(i, m)| RankRow {
                model_id: m.model_id.clone(),
                downloads: m.downloads,
                common_words: commons[i] as u64,
                rank_downloads: rank_dl[i],
                rank_common_words: rank_cw[i],
            })
            .collect(),
    }
}

/// Batch-parallel corpus histogram: one partial histogram per manifest
/// batch, merged in batch order. Equivalent to a single pass by the merge
/// law.
pub fn corpus_histogram(
    manifest: &CorpusManifest,
    corpus_dir: &Path,
    filter: &FilterConfig,
    workers: usize,
) -> Result<WordHistogram> {
    let batches = manifest.batches();
    let slots: Mutex<Vec<Option<Result<WordHistogram>>>> =
        Mutex::new((0..batches.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(batches.len().max(1)) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= batches.len() {
                    return;
                }
                let mut partial = WordHistogram::new(format!("batch{idx}"));
                let mut failure: Option<Error> = None;
                for record in batches[idx] {
                    let Some(rel) = &record.card_path else {
                        continue;
                    };
                    let abs = corpus_dir.join(rel);
                    match std::fs::read(&abs) {
                        Ok(bytes) => {
                            let text = String::from_utf8_lossy(&bytes);
                            for token in tokenize(&text, filter) {
                                partial.add(token);
                            }
                        }
                        Err(e) => {
                            failure = Some(Error::io(&abs, e));
                            break;
                        }
                    }
                }
                let result = match failure {
                    Some(e) => Err(e),
                    None => Ok(partial),
                };
                slots.lock().expect("slot lock")[idx] = Some(result);
            });
        }
    });
    let slots = slots.into_inner().expect("slot lock");
    let mut partials = Vec::with_capacity(slots.len());
    for slot in slots {
        partials.push(slot.expect("every batch slot is filled")?);
    }
    Ok(WordHistogram::merge(partials.iter()))
}

/// Runs the requested stages in canonical order. A stage whose declared
/// inputs and recorded outputs are unchanged is a no-op.
pub fn run_pipeline(cfg: &RunConfig, stages: &[Stage]) -> Result<Vec<StageReport>> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let state_path = cfg.output_dir.join("pipeline_state.json");
    let mut state: PipelineState = match std::fs::read_to_string(&state_path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
        Err(_) => PipelineState::default(),
    };

    let requested: HashSet<Stage> = stages.iter().copied().collect();
    let ordered: Vec<Stage> = Stage::ALL
        .into_iter()
        .filter(|s| requested.contains(s))
        .collect();

    let ctx = PipelineCtx { cfg };
    let mut reports = Vec::new();
    for stage in ordered {
        let inputs = ctx.stage_inputs(stage)?;
        let previous = state.stages.get(stage.name());
        let unchanged = previous.is_some_and(|prev| {
            prev.inputs == inputs
                && prev.outputs.iter().all(|(path, hash)| {
                    hash_file(Path::new(path)).is_ok_and(|h| &h == hash)
                })
        });
        if unchanged {
            reports.push(StageReport {
                stage,
                skipped: true,
                outputs: previous
                    .map(|p| p.outputs.keys().map(PathBuf::from).collect())
                    .unwrap_or_default(),
            });
            continue;
        }
        let outputs = ctx.run_stage(stage).map_err(|e| match e {
            Error::MissingPrerequisite { .. } => e,
            other => Error::Stage {
                stage: stage.name().to_string(),
                reason: other.to_string(),
            },
        })?;
        let mut output_hashes = BTreeMap::new();
        for path in &outputs {
            output_hashes.insert(path.display().to_string(), hash_file(path)?);
        }
        // Ingest may change what downstream stages see; their input hashes
        // are recomputed naturally on their turn.
        state.stages.insert(
            stage.name().to_string(),
            StageState {
                inputs,
                outputs: output_hashes,
            },
        );
        reports.push(StageReport {
            stage,
            skipped: false,
            outputs,
        });
    }

    let new_state = serde_json::to_string_pretty(&state)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let new_state = format!("{new_state}\n");
    if std::fs::read_to_string(&state_path).map(|old| old != new_state).unwrap_or(true) {
        std::fs::write(&state_path, new_state).map_err(|e| Error::io(&state_path, e))?;
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_losslessly() {
        let mut cfg = RunConfig::default();
        cfg.endpoint = Some("https://hub.test/api/models".to_string());
        cfg.template_path = Some(PathBuf::from("zd.md"));
        cfg.cohort.kind = "cluster".to_string();
        cfg.seed = 99;
        let toml_text = cfg.to_toml().unwrap();
        let parsed: RunConfig = toml::from_str(&toml_text).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn stage_parsing() {
        assert_eq!(Stage::parse("hist").unwrap(), Stage::Hist);
        assert!(Stage::parse("nope").is_err());
    }

    #[test]
    fn cohort_options_to_spec() {
        let mut opts = CohortOptions::default();
        opts.kind = "top".to_string();
        let spec = opts.to_spec(1).unwrap();
        assert_eq!(
            spec,
            CohortSpec::Top {
                download_threshold: 10_000_000,
                likes_threshold: 4_000
            }
        );
        opts.kind = "bogus".to_string();
        assert!(opts.to_spec(1).is_err());
    }
}
