//! Corpus ingestion: fetches model listings and README documents from a
//! model-hub HTTP API (or imports a pre-downloaded local tree) into a
//! resumable, batched on-disk corpus store with reuse metadata.

pub mod hub;

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SIZE_CUTOFF_BYTES: u64 = 1_048_576;
pub const DEFAULT_BATCH_COUNT: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchStatus {
    Fetched,
    MissingCard,
    FilteredOversize,
    Error,
}

/// One hub model with its reuse metadata and card fetch outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub model_id: String,
    pub downloads: u64,
    pub likes: u64,
    /// Store-relative card path; absent exactly when no card was stored.
    pub card_path: Option<String>,
    pub card_size_bytes: u64,
    pub status: FetchStatus,
    pub fetched_at: DateTime<Utc>,
    /// Failure reason when status is `Error`.
    pub error: Option<String>,
}

impl ModelRecord {
    /// A freshly listed model: no card attempted yet.
    pub fn listed(model_id: impl Into<String>, downloads: u64, likes: u64) -> Self {
        ModelRecord {
            model_id: model_id.into(),
            downloads,
            likes,
            card_path: None,
            card_size_bytes: 0,
            status: FetchStatus::MissingCard,
            fetched_at: epoch(),
            error: None,
        }
    }

    pub fn is_documented(&self) -> bool {
        self.status == FetchStatus::Fetched
    }
}

pub(crate) fn epoch() -> DateTime<Utc> {
    DateTime::<Utc>::from_timestamp(0, 0).expect("epoch is representable")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    HubApi,
    LocalDir,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub fetched: usize,
    pub missing_card: usize,
    pub filtered_oversize: usize,
    pub error: usize,
}

impl StatusCounts {
    pub fn total(&self) -> usize {
        self.fetched + self.missing_card + self.filtered_oversize + self.error
    }
}

/// The persisted view of a corpus: unique records partitioned into
/// `batch_count` contiguous, near-equal batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub records: Vec<ModelRecord>,
    pub batch_count: usize,
    pub created_at: DateTime<Utc>,
    pub source: CorpusSource,
}

impl CorpusManifest {
    /// Contiguous batch slices; sizes differ by at most one.
    pub fn batches(&self) -> Vec<&[ModelRecord]> {
        let n = self.records.len();
        let k = self.batch_count.max(1);
        let base = n / k;
        let extra = n % k;
        let mut out = Vec::with_capacity(k);
        let mut start = 0;
        for i in 0..k {
            let len = base + usize::from(i < extra);
            out.push(&self.records[start..start + len]);
            start += len;
        }
        out
    }

    pub fn status_counts(&self) -> StatusCounts {
        let mut c = StatusCounts::default();
        for r in &self.records {
            match r.status {
                FetchStatus::Fetched => c.fetched += 1,
                FetchStatus::MissingCard => c.missing_card += 1,
                FetchStatus::FilteredOversize => c.filtered_oversize += 1,
                FetchStatus::Error => c.error += 1,
            }
        }
        c
    }
}

const JOURNAL_FILE: &str = "journal.jsonl";
const MANIFEST_FILE: &str = "manifest.jsonl";
const META_FILE: &str = "manifest_meta.json";
const CARDS_DIR: &str = "cards";

fn validate_model_id(model_id: &str) -> Result<()> {
    if model_id.is_empty()
        || model_id.starts_with('/')
        || model_id.split('/').any(|seg| seg.is_empty() || seg == "." || seg == "..")
    {
        return Err(Error::InvalidArgument(format!(
            "unsafe model id {model_id:?}"
        )));
    }
    Ok(())
}

/// On-disk layout: `<root>/journal.jsonl` (fetch journal),
/// `<root>/manifest.jsonl` + `<root>/manifest_meta.json` (built manifest),
/// `<root>/cards/<sanitized_model_id>.md`.
pub struct CorpusStore {
    root: PathBuf,
    /// sanitized card file name -> owning model id, to surface collisions.
    claims: Mutex<HashMap<String, String>>,
    journal_lock: Mutex<()>,
}

impl CorpusStore {
    pub fn create(root: impl Into<PathBuf>) -> Result<CorpusStore> {
        let root = root.into();
        std::fs::create_dir_all(root.join(CARDS_DIR)).map_err(|e| Error::io(&root, e))?;
        let store = CorpusStore {
            root,
            claims: Mutex::new(HashMap::new()),
            journal_lock: Mutex::new(()),
        };
        for record in store.journal_records()? {
            if record.card_path.is_some() {
                store.claim(&record.model_id)?;
            }
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn journal_path(&self) -> PathBuf {
        self.root.join(JOURNAL_FILE)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn meta_path(&self) -> PathBuf {
        self.root.join(META_FILE)
    }

    /// Deterministic card file name: URL-ish separators and anything outside
    /// `[A-Za-z0-9._-]` become underscores.
    pub fn sanitized_file_name(model_id: &str) -> String {
        let mut out = String::with_capacity(model_id.len() + 3);
        for c in model_id.chars() {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-') {
                out.push(c);
            } else {
                out.push('_');
            }
        }
        out.push_str(".md");
        out
    }

    pub fn card_rel_path(model_id: &str) -> String {
        format!("{CARDS_DIR}/{}", Self::sanitized_file_name(model_id))
    }

    fn claim(&self, model_id: &str) -> Result<String> {
        let name = Self::sanitized_file_name(model_id);
        let mut claims = self.claims.lock().expect("claims lock");
        if let Some(owner) = claims.get(&name) {
            if owner != model_id {
                return Err(Error::PathCollision {
                    first: owner.clone(),
                    second: model_id.to_string(),
                    path: format!("{CARDS_DIR}/{name}"),
                });
            }
        } else {
            claims.insert(name.clone(), model_id.to_string());
        }
        Ok(format!("{CARDS_DIR}/{name}"))
    }

    /// Stores card bytes under the model's deterministic path. Two distinct
    /// model ids mapping to the same path is a hard error.
    pub fn write_card(&self, model_id: &str, bytes: &[u8]) -> Result<(String, u64)> {
        validate_model_id(model_id)?;
        let rel = self.claim(model_id)?;
        let abs = self.root.join(&rel);
        std::fs::write(&abs, bytes).map_err(|e| Error::io(&abs, e))?;
        Ok((rel, bytes.len() as u64))
    }

    pub fn read_card_text(&self, rel_path: &str) -> Result<String> {
        let abs = self.root.join(rel_path);
        let bytes = std::fs::read(&abs).map_err(|e| Error::io(&abs, e))?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    /// Appends one record to the fetch journal.
    pub fn append_record(&self, record: &ModelRecord) -> Result<()> {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let _guard = self.journal_lock.lock().expect("journal lock");
        let path = self.journal_path();
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        writeln!(file, "{line}").map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    /// All journal records in append order; empty when no journal exists.
    pub fn journal_records(&self) -> Result<Vec<ModelRecord>> {
        read_records(&self.journal_path(), true)
    }
}

fn read_records(path: &Path, allow_missing: bool) -> Result<Vec<ModelRecord>> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if allow_missing && e.kind() == std::io::ErrorKind::NotFound => {
            return Ok(Vec::new())
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ModelRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

#[derive(Serialize, Deserialize)]
struct ManifestMeta {
    batch_count: usize,
    created_at: DateTime<Utc>,
    source: CorpusSource,
    record_count: usize,
}

fn records_to_jsonl(records: &[ModelRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::InvalidArgument(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

fn write_if_changed(path: &Path, content: &str) -> Result<()> {
    if let Ok(existing) = std::fs::read_to_string(path) {
        if existing == content {
            return Ok(());
        }
    }
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// Compacts the journal into `manifest.jsonl`: records deduplicated by
/// model id (last journal entry wins, so resumed retries replace earlier
/// failures), sorted by model id. Idempotent on an unchanged store: the
/// manifest bytes, including the creation timestamp, are preserved.
pub fn build_manifest(
    store_root: &Path,
    batch_count: usize,
    source: CorpusSource,
) -> Result<CorpusManifest> {
    if batch_count < 1 {
        return Err(Error::InvalidArgument(
            "batch_count must be at least 1".to_string(),
        ));
    }
    let journal = store_root.join(JOURNAL_FILE);
    let manifest_path = store_root.join(MANIFEST_FILE);
    let mut raw = read_records(&journal, true)?;
    if raw.is_empty() {
        // A rebuilt store may only have the compacted manifest left.
        raw = read_records(&manifest_path, true)?;
    }

    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut records: Vec<ModelRecord> = Vec::new();
    for record in raw {
        match by_id.get(&record.model_id) {
            Some(&slot) => records[slot] = record,
            None => {
                by_id.insert(record.model_id.clone(), records.len());
                records.push(record);
            }
        }
    }
    records.sort_by(|a, b| a.model_id.cmp(&b.model_id));

    let mut claimed: HashMap<String, &str> = HashMap::new();
    for r in &records {
        if r.card_path.is_some() {
            let name = CorpusStore::sanitized_file_name(&r.model_id);
            if let Some(owner) = claimed.insert(name.clone(), &r.model_id) {
                return Err(Error::PathCollision {
                    first: owner.to_string(),
                    second: r.model_id.clone(),
                    path: name,
                });
            }
        }
    }

    let new_jsonl = records_to_jsonl(&records)?;
    let meta_path = store_root.join(META_FILE);
    let created_at = match (std::fs::read_to_string(&manifest_path), std::fs::read_to_string(&meta_path)) {
        (Ok(old_jsonl), Ok(old_meta)) if old_jsonl == new_jsonl => {
            match serde_json::from_str::<ManifestMeta>(&old_meta) {
                Ok(meta) if meta.batch_count == batch_count && meta.source == source => {
                    meta.created_at
                }
                _ => Utc::now(),
            }
        }
        _ => Utc::now(),
    };

    write_if_changed(&manifest_path, &new_jsonl)?;
    let meta = ManifestMeta {
        batch_count,
        created_at,
        source,
        record_count: records.len(),
    };
    let meta_json =
        serde_json::to_string_pretty(&meta).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    write_if_changed(&meta_path, &format!("{meta_json}\n"))?;

    Ok(CorpusManifest {
        records,
        batch_count,
        created_at,
        source,
    })
}

/// Loads a previously built manifest.
pub fn load_manifest(store_root: &Path) -> Result<CorpusManifest> {
    let records = read_records(&store_root.join(MANIFEST_FILE), false)?;
    let meta_path = store_root.join(META_FILE);
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: ManifestMeta =
        serde_json::from_str(&meta_text).map_err(|e| Error::Config(e.to_string()))?;
    Ok(CorpusManifest {
        records,
        batch_count: meta.batch_count,
        created_at: meta.created_at,
        source: meta.source,
    })
}

#[derive(Deserialize)]
struct LocalMeta {
    model_id: String,
    #[serde(default)]
    downloads: u64,
    #[serde(default)]
    likes: u64,
}

/// Imports a local corpus tree (`<model_id>/README.md` plus a
/// `metadata.jsonl` sidecar carrying downloads/likes) into a store, applying
/// the same oversize filter as network fetching. Record timestamps are
/// pinned to the epoch so local pipelines are fully deterministic.
pub fn import_local_dir(src: &Path, store: &CorpusStore, cutoff_bytes: u64) -> Result<usize> {
    let meta_path = src.join("metadata.jsonl");
    let file = std::fs::File::open(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let reader = BufReader::new(file);
    let mut seen = HashMap::new();
    let mut count = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&meta_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let meta: LocalMeta = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: meta_path.clone(),
            line: idx + 1,
            reason: e.to_string(),
        })?;
        validate_model_id(&meta.model_id)?;
        if seen.insert(meta.model_id.clone(), idx).is_some() {
            return Err(Error::MalformedLine {
                path: meta_path.clone(),
                line: idx + 1,
                reason: format!("duplicate model id {:?}", meta.model_id),
            });
        }
        let card_file = src.join(&meta.model_id).join("README.md");
        let mut record = ModelRecord::listed(&meta.model_id, meta.downloads, meta.likes);
        match std::fs::metadata(&card_file) {
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                record.status = FetchStatus::MissingCard;
            }
            Err(e) => return Err(Error::io(&card_file, e)),
            Ok(stat) if stat.len() > cutoff_bytes => {
                record.status = FetchStatus::FilteredOversize;
                record.card_size_bytes = stat.len();
            }
            Ok(_) => {
                let bytes = std::fs::read(&card_file).map_err(|e| Error::io(&card_file, e))?;
                let (rel, size) = store.write_card(&meta.model_id, &bytes)?;
                record.status = FetchStatus::Fetched;
                record.card_path = Some(rel);
                record.card_size_bytes = size;
            }
        }
        store.append_record(&record)?;
        count += 1;
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, status: FetchStatus) -> ModelRecord {
        let mut r = ModelRecord::listed(id, 1, 0);
        r.status = status;
        if status == FetchStatus::Fetched {
            r.card_path = Some(CorpusStore::card_rel_path(id));
        }
        r
    }

    #[test]
    fn batch_sizes_differ_by_at_most_one() {
        let dir = tempfile::tempdir().unwrap();
        let store = CorpusStore::create(dir.path()).unwrap();
        for i in 0..10 {
            store
                .append_record(&record(&format!("m{i:02}"), FetchStatus::MissingCard))
                .unwrap();
        }
        let manifest = build_manifest(dir.path(), 3, CorpusSource::LocalDir).unwrap();
        let sizes: Vec<usize> = manifest.batches().iter().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
    }

    #[test]
    fn empty_store_one_batch() {
        let dir = tempfile::tempdir().unwrap();
        CorpusStore::create(dir.path()).unwrap();
        let manifest = build_manifest(dir.path(), 1, CorpusSource::LocalDir).unwrap();
        assert!(manifest.records.is_empty());
        assert_eq!(manifest.batches().len(), 1);
    }

    #[test]
    fn rebuild_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let store = CorpusStore::create(dir.path()).unwrap();
        for i in 0..5 {
            store
                .append_record(&record(&format!("m{i}"), FetchStatus::MissingCard))
                .unwrap();
        }
        build_manifest(dir.path(), 2, CorpusSource::LocalDir).unwrap();
        let first = std::fs::read(dir.path().join("manifest.jsonl")).unwrap();
        let first_meta = std::fs::read(dir.path().join("manifest_meta.json")).unwrap();
        std::thread::sleep(std::time::Duration::from_millis(5));
        build_manifest(dir.path(), 2, CorpusSource::LocalDir).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("manifest.jsonl")).unwrap());
        assert_eq!(
            first_meta,
            std::fs::read(dir.path().join("manifest_meta.json")).unwrap()
        );
    }

    #[test]
    fn batch_count_zero_is_error() {
        let dir = tempfile::tempdir().unwrap();
        CorpusStore::create(dir.path()).unwrap();
        assert!(build_manifest(dir.path(), 0, CorpusSource::LocalDir).is_err());
    }

    #[test]
    fn last_journal_entry_wins() {
        let dir = tempfile::tempdir().unwrap();
        let store = CorpusStore::create(dir.path()).unwrap();
        store.append_record(&record("m0", FetchStatus::Error)).unwrap();
        store.append_record(&record("m0", FetchStatus::MissingCard)).unwrap();
        let manifest = build_manifest(dir.path(), 1, CorpusSource::HubApi).unwrap();
        assert_eq!(manifest.records.len(), 1);
        assert_eq!(manifest.records[0].status, FetchStatus::MissingCard);
    }

    #[test]
    fn sanitized_path_collision_is_hard_error() {
        let dir = tempfile::tempdir().unwrap();
        let store = CorpusStore::create(dir.path()).unwrap();
        store.write_card("acme/card", b"a").unwrap();
        let err = store.write_card("acme_card", b"b").unwrap_err();
        assert!(matches!(err, Error::PathCollision { .. }));
    }

    #[test]
    fn status_counts_partition_records() {
        let dir = tempfile::tempdir().unwrap();
        let store = CorpusStore::create(dir.path()).unwrap();
        store.append_record(&record("a", FetchStatus::MissingCard)).unwrap();
        store.append_record(&record("b", FetchStatus::Error)).unwrap();
        store.append_record(&record("c", FetchStatus::FilteredOversize)).unwrap();
        let manifest = build_manifest(dir.path(), 2, CorpusSource::HubApi).unwrap();
        let counts = manifest.status_counts();
        assert_eq!(counts.total(), manifest.records.len());
    }

    #[test]
    fn local_import_classifies_records() {
        let src = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(src.path().join("acme/small")).unwrap();
        std::fs::write(src.path().join("acme/small/README.md"), "# Hi\nbody\n").unwrap();
        std::fs::create_dir_all(src.path().join("acme/big")).unwrap();
        std::fs::write(src.path().join("acme/big/README.md"), vec![b'x'; 64]).unwrap();
        std::fs::write(
            src.path().join("metadata.jsonl"),
            concat!(
                "{\"model_id\":\"acme/small\",\"downloads\":10,\"likes\":1}\n",
                "{\"model_id\":\"acme/big\",\"downloads\":5}\n",
                "{\"model_id\":\"acme/none\",\"downloads\":2,\"likes\":0}\n",
            ),
        )
        .unwrap();
        let store_dir = tempfile::tempdir().unwrap();
        let store = CorpusStore::create(store_dir.path()).unwrap();
        let n = import_local_dir(src.path(), &store, 32).unwrap();
        assert_eq!(n, 3);
        let manifest = build_manifest(store_dir.path(), 1, CorpusSource::LocalDir).unwrap();
        let by_id: HashMap<&str, &ModelRecord> = manifest
            .records
            .iter()
            .map(|r| (r.model_id.as_str(), r))
            .collect();
        assert_eq!(by_id["acme/small"].status, FetchStatus::Fetched);
        assert_eq!(by_id["acme/big"].status, FetchStatus::FilteredOversize);
        assert_eq!(by_id["acme/big"].card_path, None);
        assert_eq!(by_id["acme/none"].status, FetchStatus::MissingCard);
        let text = store
            .read_card_text(by_id["acme/small"].card_path.as_ref().unwrap())
            .unwrap();
        assert!(text.contains("body"));
    }

    #[test]
    fn unsafe_model_ids_rejected() {
        assert!(validate_model_id("../evil").is_err());
        assert!(validate_model_id("/abs").is_err());
        assert!(validate_model_id("a//b").is_err());
        assert!(validate_model_id("ok/fine-1.2").is_ok());
    }
}
