//! The dataset-first crawl loop.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Component, Path, PathBuf};

use rand::RngCore;
use thiserror::Error;

use crate::backoff::{backoff_schedule, Clock, Pacer};
use crate::client::{self, CatalogClient, ClientError, DatasetDownload};
use crate::config::HarvestConfig;
use crate::filter::{accept_dataset, accept_notebook, Decision};
use crate::ledger::{CrawlLedger, StoredNotebook};
use crate::model::{DatasetMeta, NotebookMeta};

pub const DATASET_QUERY: &str = "datasets";

#[derive(Debug, Error)]
pub enum HarvestError {
    #[error("gave up on {request} after {attempts} rate-limited attempts")]
    AbortedAfterMaxRetries { request: String, attempts: u32 },
    #[error("ledger write failed: {0}")]
    Ledger(#[source] io::Error),
    #[error("storing {what} failed: {source}")]
    Sink { what: String, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    NothingRequested,
    TargetReached,
    CatalogExhausted,
    PageCap,
    ListingFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarvestResult {
    pub notebooks_fetched: u64,
    pub datasets_touched: u64,
    pub pages_visited: u64,
    pub rate_limit_events: u64,
    /// Retries after transport errors (rate-limit retries are counted above).
    pub transport_retries: u64,
    pub fetched: Vec<StoredNotebook>,
    /// Metadata of datasets accepted and downloaded in this run.
    pub datasets: Vec<DatasetMeta>,
    /// Listing metadata of every fetched notebook, in fetch order.
    pub notebook_meta: Vec<NotebookMeta>,
    pub stop: StopReason,
}

impl HarvestResult {
    fn new() -> Self {
        Self {
            notebooks_fetched: 0,
            datasets_touched: 0,
            pages_visited: 0,
            rate_limit_events: 0,
            transport_retries: 0,
            fetched: Vec::new(),
            datasets: Vec::new(),
            notebook_meta: Vec::new(),
            stop: StopReason::NothingRequested,
        }
    }
}

/// Where downloaded artifacts go.
pub trait HarvestSink {
    fn store_dataset(&mut self, download: &DatasetDownload) -> io::Result<()>;
    /// Returns the path the notebook was written to.
    fn store_notebook(&mut self, dataset_ref: &str, notebook_ref: &str, text: &str) -> io::Result<PathBuf>;
}

/// Writes `<root>/<dataset_ref>/<notebook_ref>.ipynb`, plus `dataset.json`
/// (and `content.bin` when non-empty) per dataset.
pub struct DirSink {
    root: PathBuf,
}

impl DirSink {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn safe_join(&self, parts: &[&str]) -> io::Result<PathBuf> {
        let mut path = self.root.clone();
        for part in parts {
            let rel = Path::new(part);
            if rel
                .components()
                .any(|c| !matches!(c, Component::Normal(_)))
            {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidInput,
                    format!("unsafe ref `{part}`"),
                ));
            }
            path.push(rel);
        }
        Ok(path)
    }
}

impl HarvestSink for DirSink {
    fn store_dataset(&mut self, download: &DatasetDownload) -> io::Result<()> {
        let dir = self.safe_join(&[&download.meta.dataset_ref])?;
        fs::create_dir_all(&dir)?;
        let mut meta = serde_json::to_string_pretty(&download.meta).map_err(io::Error::other)?;
        meta.push('\n');
        fs::write(dir.join("dataset.json"), meta)?;
        if !download.content.is_empty() {
            fs::write(dir.join("content.bin"), &download.content)?;
        }
        Ok(())
    }

    fn store_notebook(&mut self, dataset_ref: &str, notebook_ref: &str, text: &str) -> io::Result<PathBuf> {
        let path = self.safe_join(&[dataset_ref, &format!("{notebook_ref}.ipynb")])?;
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Time and randomness used for pacing and backoff.
pub struct HarvestEnv<'a> {
    pub clock: &'a mut dyn Clock,
    pub rng: &'a mut dyn RngCore,
}

struct Crawl<'a> {
    client: &'a mut dyn CatalogClient,
    config: &'a HarvestConfig,
    ledger: &'a mut CrawlLedger,
    sink: &'a mut dyn HarvestSink,
    env: HarvestEnv<'a>,
    pacer: Pacer,
    result: HarvestResult,
    datasets_with_notebooks: BTreeSet<String>,
}

enum Flow {
    Continue,
    Stop(StopReason),
}

impl Crawl<'_> {
    fn target_met(&self) -> bool {
        self.result.notebooks_fetched >= self.config.target_notebook_count
    }

    fn done(&self) -> bool {
        self.target_met()
            && self.datasets_with_notebooks.len() as u64 >= self.config.min_distinct_datasets
    }

    /// Runs `op` under pacing. Rate limits back off (honouring a server hint
    /// when it asks for longer) and resume the same request; transport errors
    /// are retried on the same schedule and then handed back.
    fn request<T>(
        &mut self,
        what: &str,
        mut op: impl FnMut(&mut dyn CatalogClient) -> Result<T, ClientError>,
    ) -> Result<Result<T, ClientError>, HarvestError> {
        let mut attempt = 0;
        loop {
            self.pacer.wait(self.env.clock);
            match op(self.client) {
                Ok(v) => return Ok(Ok(v)),
                Err(ClientError::RateLimited { retry_after }) => {
                    attempt += 1;
                    self.result.rate_limit_events += 1;
                    let delay = backoff_schedule(attempt, self.env.rng).map_err(|e| {
                        HarvestError::AbortedAfterMaxRetries {
                            request: what.to_string(),
                            attempts: e.attempts - 1,
                        }
                    })?;
                    let delay = retry_after.map_or(delay, |hint| hint.max(delay));
                    tracing::warn!(request = what, attempt, ?delay, "rate limited; backing off");
                    self.env.clock.sleep(delay);
                }
                Err(ClientError::Transport(msg)) => {
                    attempt += 1;
                    match backoff_schedule(attempt, self.env.rng) {
                        Ok(delay) => {
                            self.result.transport_retries += 1;
                            tracing::warn!(request = what, attempt, %msg, "transport error; retrying");
                            self.env.clock.sleep(delay);
                        }
                        Err(_) => return Ok(Err(ClientError::Transport(msg))),
                    }
                }
                Err(other) => return Ok(Err(other)),
            }
        }
    }

    fn run(&mut self) -> Result<StopReason, HarvestError> {
        let mut page = self.ledger.cursor(DATASET_QUERY).unwrap_or(1);
        loop {
            if page > self.config.max_pages {
                return Ok(StopReason::PageCap);
            }
            let config = self.config;
            let listed = self.request(&format!("dataset page {page}"), |c| {
                client::list_datasets(c, page, config)
            })?;
            let datasets = match listed {
                Ok(d) => d,
                Err(e) => {
                    tracing::error!("dataset listing page {page} failed: {e}");
                    return Ok(StopReason::ListingFailed);
                }
            };
            self.result.pages_visited += 1;
            if datasets.is_empty() {
                return Ok(StopReason::CatalogExhausted);
            }
            for meta in &datasets {
                if self.done() {
                    return Ok(StopReason::TargetReached);
                }
                if let Flow::Stop(reason) = self.visit_dataset(meta)? {
                    return Ok(reason);
                }
            }
            page += 1;
            self.ledger
                .record_cursor(DATASET_QUERY, page)
                .map_err(HarvestError::Ledger)?;
        }
    }

    fn visit_dataset(&mut self, meta: &DatasetMeta) -> Result<Flow, HarvestError> {
        let dataset_ref = meta.dataset_ref.as_str();
        if let Decision::Reject(reason) = accept_dataset(meta, self.config) {
            tracing::debug!(dataset = dataset_ref, %reason, "dataset rejected");
            return Ok(Flow::Continue);
        }
        if self.ledger.dataset_complete(dataset_ref) {
            return Ok(Flow::Continue);
        }
        if !self.ledger.has_dataset(dataset_ref) {
            let download = match self.request(&format!("dataset {dataset_ref}"), |c| {
                c.download_dataset(dataset_ref)
            })? {
                Ok(d) => d,
                Err(e) => {
                    tracing::warn!(dataset = dataset_ref, "download failed: {e}");
                    return Ok(Flow::Continue);
                }
            };
            // Listing metadata was filtered; the downloaded copy must agree.
            if !accept_dataset(&download.meta, self.config).is_accept() {
                tracing::warn!(dataset = dataset_ref, "downloaded metadata fails the filters");
                return Ok(Flow::Continue);
            }
            self.sink
                .store_dataset(&download)
                .map_err(|source| HarvestError::Sink {
                    what: dataset_ref.to_string(),
                    source,
                })?;
            self.ledger
                .record_dataset(dataset_ref, false)
                .map_err(HarvestError::Ledger)?;
            self.result.datasets.push(download.meta);
        }
        self.result.datasets_touched += 1;
        self.visit_kernels(dataset_ref)
    }

    fn visit_kernels(&mut self, dataset_ref: &str) -> Result<Flow, HarvestError> {
        let query = format!("kernels:{dataset_ref}");
        let mut page = self.ledger.cursor(&query).unwrap_or(1);
        let mut fetched_here = 0u64;
        while page <= self.config.max_pages {
            let config = self.config;
            let listed = self.request(&format!("{query} page {page}"), |c| {
                client::list_kernels(c, dataset_ref, page, config)
            })?;
            let kernels = match listed {
                Ok(k) => k,
                Err(e) => {
                    tracing::warn!(dataset = dataset_ref, "kernel listing failed: {e}");
                    return Ok(Flow::Continue);
                }
            };
            self.result.pages_visited += 1;
            if kernels.is_empty() {
                break;
            }
            for meta in &kernels {
                if self.done() {
                    return Ok(Flow::Stop(StopReason::TargetReached));
                }
                // Past the target only breadth is still missing: one notebook
                // per further dataset.
                if self.target_met() && fetched_here > 0 {
                    return Ok(Flow::Continue);
                }
                if let Decision::Reject(reason) = accept_notebook(meta, self.config, self.ledger) {
                    tracing::debug!(notebook = %meta.notebook_ref, %reason, "notebook rejected");
                    continue;
                }
                if self.fetch(dataset_ref, meta)? {
                    fetched_here += 1;
                }
            }
            page += 1;
            self.ledger
                .record_cursor(&query, page)
                .map_err(HarvestError::Ledger)?;
        }
        self.ledger
            .record_dataset(dataset_ref, true)
            .map_err(HarvestError::Ledger)?;
        Ok(Flow::Continue)
    }

    fn fetch(&mut self, dataset_ref: &str, meta: &NotebookMeta) -> Result<bool, HarvestError> {
        let notebook_ref = meta.notebook_ref.as_str();
        let text = match self.request(&format!("notebook {notebook_ref}"), |c| {
            c.fetch_notebook(notebook_ref)
        })? {
            Ok(t) => t,
            Err(e) => {
                tracing::warn!(notebook = notebook_ref, "fetch failed: {e}");
                return Ok(false);
            }
        };
        let path = self
            .sink
            .store_notebook(dataset_ref, notebook_ref, &text)
            .map_err(|source| HarvestError::Sink {
                what: notebook_ref.to_string(),
                source,
            })?;
        let path = path.to_string_lossy().into_owned();
        self.ledger
            .record_notebook(notebook_ref, dataset_ref, &path)
            .map_err(HarvestError::Ledger)?;
        self.result.notebooks_fetched += 1;
        self.result.fetched.push(StoredNotebook {
            notebook_ref: notebook_ref.to_string(),
            dataset_ref: dataset_ref.to_string(),
            path,
        });
        self.result.notebook_meta.push(meta.clone());
        self.datasets_with_notebooks.insert(dataset_ref.to_string());
        Ok(true)
    }
}

/// Crawls until this run has fetched `target_notebook_count` notebooks from
/// at least `min_distinct_datasets` datasets, the catalog runs out, or the
/// page cap is reached. Resumes from the ledger's cursors and never fetches a
/// notebook the ledger already holds.
pub fn run_harvest<'a>(
    client: &'a mut dyn CatalogClient,
    config: &'a HarvestConfig,
    ledger: &'a mut CrawlLedger,
    sink: &'a mut dyn HarvestSink,
    env: HarvestEnv<'a>,
) -> Result<HarvestResult, HarvestError> {
    if config.target_notebook_count == 0 {
        return Ok(HarvestResult::new());
    }
    let mut crawl = Crawl {
        client,
        config,
        ledger,
        sink,
        env,
        pacer: Pacer::per_minute(config.rate_per_minute),
        result: HarvestResult::new(),
        datasets_with_notebooks: BTreeSet::new(),
    };
    let stop = crawl.run()?;
    let mut result = crawl.result;
    result.stop = stop;
    tracing::info!(
        fetched = result.notebooks_fetched,
        datasets = result.datasets_touched,
        pages = result.pages_visited,
        rate_limits = result.rate_limit_events,
        ?stop,
        "harvest finished"
    );
    Ok(result)
}
