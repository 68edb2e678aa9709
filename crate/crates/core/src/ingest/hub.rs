//! HTTP hub client: paginated model listing, card download with bounded
//! retries, global rate pacing, and the concurrent fetch driver.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::Utc;

use crate::error::{Error, Result};
use crate::ingest::{
    build_manifest, CorpusManifest, CorpusSource, CorpusStore, FetchStatus, ModelRecord,
};

/// Time source abstraction so pacing is assertable against a mock clock.
pub trait Clock: Send + Sync {
    fn now_millis(&self) -> u64;
    fn sleep_millis(&self, ms: u64);
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now_millis(&self) -> u64 {
        self.origin.elapsed().as_millis() as u64
    }

    fn sleep_millis(&self, ms: u64) {
        std::thread::sleep(Duration::from_millis(ms));
    }
}

/// Deterministic clock for tests: sleeping advances time instantly.
pub struct MockClock {
    now: AtomicU64,
    slept: AtomicU64,
}

impl Default for MockClock {
    fn default() -> Self {
        MockClock {
            now: AtomicU64::new(0),
            slept: AtomicU64::new(0),
        }
    }
}

impl MockClock {
    pub fn total_slept_millis(&self) -> u64 {
        self.slept.load(Ordering::SeqCst)
    }
}

impl Clock for MockClock {
    fn now_millis(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }

    fn sleep_millis(&self, ms: u64) {
        self.now.fetch_add(ms, Ordering::SeqCst);
        self.slept.fetch_add(ms, Ordering::SeqCst);
    }
}

/// Serializes request starts so the mean inter-request interval never drops
/// below the configured pacing interval, across all workers.
pub struct Pacer {
    interval_ms: u64,
    last: Mutex<Option<u64>>,
}

impl Pacer {
    pub fn new(interval_ms: u64) -> Pacer {
        Pacer {
            interval_ms,
            last: Mutex::new(None),
        }
    }

    pub fn pace(&self, clock: &dyn Clock) {
        if self.interval_ms == 0 {
            return;
        }
        let mut last = self.last.lock().expect("pacer lock");
        let now = clock.now_millis();
        let start = match *last {
            Some(prev) => {
                let due = prev + self.interval_ms;
                if now < due {
                    clock.sleep_millis(due - now);
                }
                due.max(now)
            }
            None => now,
        };
        *last = Some(start);
    }
}

#[derive(Debug, Clone)]
pub struct HubConfig {
    /// First listing page URL. A `{page_size}` placeholder is substituted;
    /// otherwise a `limit` query parameter is appended.
    pub list_url: String,
    /// Raw card URL with a `{model_id}` placeholder.
    pub card_url_template: String,
    pub page_size: usize,
    pub token: Option<String>,
    /// Maximum attempts per request (first try included).
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub pace_ms: u64,
    pub concurrency: usize,
}

impl HubConfig {
    pub fn new(list_url: impl Into<String>, card_url_template: impl Into<String>) -> HubConfig {
        HubConfig {
            list_url: list_url.into(),
            card_url_template: card_url_template.into(),
            page_size: 500,
            token: None,
            max_attempts: 5,
            backoff_base_ms: 100,
            pace_ms: 500,
            concurrency: 4,
        }
    }
}

pub struct HubClient {
    cfg: HubConfig,
    http: reqwest::blocking::Client,
    pacer: Pacer,
    clock: Arc<dyn Clock>,
}

enum HttpOutcome {
    Ok(u16, Vec<u8>, Option<String>),
    Failed(String),
}

impl HubClient {
    pub fn new(cfg: HubConfig) -> Result<HubClient> {
        Self::with_clock(cfg, Arc::new(SystemClock::default()))
    }

    pub fn with_clock(cfg: HubConfig, clock: Arc<dyn Clock>) -> Result<HubClient> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Http {
                url: cfg.list_url.clone(),
                reason: e.to_string(),
            })?;
        let pacer = Pacer::new(cfg.pace_ms);
        Ok(HubClient {
            cfg,
            http,
            pacer,
            clock,
        })
    }

    pub fn config(&self) -> &HubConfig {
        &self.cfg
    }

    /// One paced GET with bounded exponential backoff on transport errors
    /// and 5xx responses. Returns the final response (any status < 500) or
    /// the last failure reason.
    fn get_with_retry(&self, url: &str) -> HttpOutcome {
        let mut reason = String::new();
        for attempt in 0..self.cfg.max_attempts.max(1) {
            if attempt > 0 {
                let backoff = self.cfg.backoff_base_ms << (attempt - 1);
                self.clock.sleep_millis(backoff);
            }
            self.pacer.pace(self.clock.as_ref());
            let mut req = self.http.get(url);
            if let Some(token) = &self.cfg.token {
                req = req.bearer_auth(token);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let next_link = resp
                        .headers()
                        .get("link")
                        .and_then(|v| v.to_str().ok())
                        .and_then(parse_next_link);
                    if status >= 500 {
                        reason = format!("http {status}");
                        continue;
                    }
                    return match resp.bytes() {
                        Ok(bytes) => HttpOutcome::Ok(status, bytes.to_vec(), next_link),
                        Err(e) => {
                            reason = e.to_string();
                            continue;
                        }
                    };
                }
                Err(e) => {
                    reason = e.to_string();
                }
            }
        }
        HttpOutcome::Failed(reason)
    }

    fn first_page_url(&self) -> String {
        if self.cfg.list_url.contains("{page_size}") {
            self.cfg
                .list_url
                .replace("{page_size}", &self.cfg.page_size.to_string())
        } else if self.cfg.list_url.contains('?') {
            format!("{}&limit={}", self.cfg.list_url, self.cfg.page_size)
        } else {
            format!("{}?limit={}", self.cfg.list_url, self.cfg.page_size)
        }
    }

    /// Streams every model the hub reports, in hub order, following the
    /// pagination link internally. A page failure after retries aborts the
    /// stream with the page URL as a resumable cursor.
    pub fn list_models(&self) -> impl Iterator<Item = Result<ModelRecord>> + '_ {
        ModelListStream {
            client: self,
            next_url: Some(self.first_page_url()),
            buffer: VecDeque::new(),
            failed: false,
        }
    }

    /// Downloads one card into the store, classifying the outcome. Network
    /// or server failures after retries yield an `Error`-status record, not
    /// a hard error; store-level problems (path collisions, i/o) do.
    pub fn fetch_card(
        &self,
        listing: &ModelRecord,
        store: &CorpusStore,
        size_cutoff_bytes: u64,
    ) -> Result<ModelRecord> {
        let url = self
            .cfg
            .card_url_template
            .replace("{model_id}", &listing.model_id);
        let mut record = listing.clone();
        record.fetched_at = Utc::now();
        match self.get_with_retry(&url) {
            HttpOutcome::Ok(200, bytes, _) => {
                if bytes.len() as u64 > size_cutoff_bytes {
                    record.status = FetchStatus::FilteredOversize;
                    record.card_size_bytes = bytes.len() as u64;
                    record.card_path = None;
                } else {
                    let (rel, size) = store.write_card(&record.model_id, &bytes)?;
                    record.status = FetchStatus::Fetched;
                    record.card_path = Some(rel);
                    record.card_size_bytes = size;
                }
            }
            HttpOutcome::Ok(404, _, _) => {
                record.status = FetchStatus::MissingCard;
                record.card_path = None;
            }
            HttpOutcome::Ok(status, _, _) => {
                record.status = FetchStatus::Error;
                record.error = Some(format!("http {status} from {url}"));
            }
            HttpOutcome::Failed(reason) => {
                record.status = FetchStatus::Error;
                record.error = Some(format!("{reason} from {url}"));
            }
        }
        Ok(record)
    }
}

fn parse_next_link(header: &str) -> Option<String> {
    for part in header.split(',') {
        let part = part.trim();
        if !part.contains("rel=\"next\"") {
            continue;
        }
        let start = part.find('<')?;
        let end = part.find('>')?;
        if start < end {
            return Some(part[start + 1..end].to_string());
        }
    }
    None
}

struct ModelListStream<'c> {
    client: &'c HubClient,
    next_url: Option<String>,
    buffer: VecDeque<ModelRecord>,
    failed: bool,
}

impl ModelListStream<'_> {
    fn parse_page(url: &str, bytes: &[u8]) -> Result<Vec<ModelRecord>> {
        let value: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| Error::MalformedPage {
                page: url.to_string(),
                reason: e.to_string(),
            })?;
        let array = value.as_array().ok_or_else(|| Error::MalformedPage {
            page: url.to_string(),
            reason: "expected a JSON array of models".to_string(),
        })?;
        let mut records = Vec::with_capacity(array.len());
        for item in array {
            let id = item
                .get("id")
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::MalformedPage {
                    page: url.to_string(),
                    reason: "model entry lacks a string `id`".to_string(),
                })?;
            let downloads = item.get("downloads").and_then(|v| v.as_u64()).unwrap_or(0);
            let likes = item.get("likes").and_then(|v| v.as_u64()).unwrap_or(0);
            records.push(ModelRecord::listed(id, downloads, likes));
        }
        Ok(records)
    }
}

impl Iterator for ModelListStream<'_> {
    type Item = Result<ModelRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(record) = self.buffer.pop_front() {
                return Some(Ok(record));
            }
            if self.failed {
                return None;
            }
            let url = self.next_url.take()?;
            match self.client.get_with_retry(&url) {
                HttpOutcome::Ok(200, bytes, next_link) => {
                    match Self::parse_page(&url, &bytes) {
                        Ok(records) => {
                            self.buffer.extend(records);
                            self.next_url = next_link;
                            // An empty page without a next link ends the stream.
                            if self.buffer.is_empty() && self.next_url.is_none() {
                                return None;
                            }
                        }
                        Err(e) => {
                            self.failed = true;
                            return Some(Err(e));
                        }
                    }
                }
                HttpOutcome::Ok(status, _, _) => {
                    self.failed = true;
                    return Some(Err(Error::PageFetch {
                        cursor: url,
                        reason: format!("http {status}"),
                    }));
                }
                HttpOutcome::Failed(reason) => {
                    self.failed = true;
                    return Some(Err(Error::PageFetch {
                        cursor: url,
                        reason,
                    }));
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FetchOptions {
    pub size_cutoff_bytes: u64,
    pub batch_count: usize,
    pub resume: bool,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions {
            size_cutoff_bytes: crate::ingest::DEFAULT_SIZE_CUTOFF_BYTES,
            batch_count: crate::ingest::DEFAULT_BATCH_COUNT,
            resume: false,
        }
    }
}

/// Lists all models, fetches cards with a bounded worker pool, journals
/// every outcome, and compacts the result into a manifest. With `resume`,
/// models already journaled with a terminal status are skipped; earlier
/// `Error` outcomes are retried.
pub fn fetch_corpus(
    client: &HubClient,
    store: &CorpusStore,
    opts: &FetchOptions,
) -> Result<CorpusManifest> {
    let mut done: std::collections::HashSet<String> = std::collections::HashSet::new();
    if opts.resume {
        for record in store.journal_records()? {
            if record.status != FetchStatus::Error {
                done.insert(record.model_id);
            }
        }
    }

    let mut queue = VecDeque::new();
    for listed in client.list_models() {
        let listed = listed?;
        if !done.contains(&listed.model_id) {
            queue.push_back(listed);
        }
    }

    let queue = Mutex::new(queue);
    let stop = AtomicBool::new(false);
    let workers = client.cfg.concurrency.max(1);
    let results: Vec<Result<()>> = std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for _ in 0..workers {
            handles.push(scope.spawn(|| -> Result<()> {
                loop {
                    if stop.load(Ordering::SeqCst) {
                        return Ok(());
                    }
                    let next = queue.lock().expect("queue lock").pop_front();
                    let Some(listing) = next else {
                        return Ok(());
                    };
                    let record =
                        match client.fetch_card(&listing, store, opts.size_cutoff_bytes) {
                            Ok(r) => r,
                            Err(e) => {
                                stop.store(true, Ordering::SeqCst);
                                return Err(e);
                            }
                        };
                    if let Err(e) = store.append_record(&record) {
                        stop.store(true, Ordering::SeqCst);
                        return Err(e);
                    }
                }
            }));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("fetch worker must not panic"))
            .collect()
    });
    for result in results {
        result?;
    }

    build_manifest(store.root(), opts.batch_count, CorpusSource::HubApi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pacer_enforces_mean_interval() {
        let clock = MockClock::default();
        let pacer = Pacer::new(500);
        let mut starts = Vec::new();
        for _ in 0..10 {
            pacer.pace(&clock);
            starts.push(clock.now_millis());
        }
        let gaps: Vec<u64> = starts.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = gaps.iter().sum::<u64>() as f64 / gaps.len() as f64;
        assert!(mean >= 500.0, "mean gap {mean} below pacing interval");
    }

    #[test]
    fn pacer_zero_interval_never_sleeps() {
        let clock = MockClock::default();
        let pacer = Pacer::new(0);
        for _ in 0..5 {
            pacer.pace(&clock);
        }
        assert_eq!(clock.total_slept_millis(), 0);
    }

    #[test]
    fn next_link_parsing() {
        assert_eq!(
            parse_next_link("<https://hub.test/api/models?cursor=abc>; rel=\"next\""),
            Some("https://hub.test/api/models?cursor=abc".to_string())
        );
        assert_eq!(parse_next_link("<https://x>; rel=\"prev\""), None);
    }

    #[test]
    fn page_parse_rejects_missing_id() {
        let err = ModelListStream::parse_page("u", br#"[{"downloads": 3}]"#).unwrap_err();
        assert!(matches!(err, Error::MalformedPage { .. }));
        let err = ModelListStream::parse_page("u", b"{}").unwrap_err();
        assert!(matches!(err, Error::MalformedPage { .. }));
    }

    #[test]
    fn page_parse_defaults_counts() {
        let records =
            ModelListStream::parse_page("u", br#"[{"id": "a/b", "downloads": 7}]"#).unwrap();
        assert_eq!(records[0].model_id, "a/b");
        assert_eq!(records[0].downloads, 7);
        assert_eq!(records[0].likes, 0);
    }
}
