//! Mock catalog backed by a fixture directory:
//!
//! ```text
//! datasets_page_<n>.json              [DatasetMeta]
//! datasets/<ref>/meta.json            DatasetMeta
//! datasets/<ref>/content.bin          optional raw content
//! kernels/<dataset_ref>_page_<n>.json [NotebookMeta]
//! notebooks/<ref>.ipynb
//! scenario.json                       {"rate_limit_after": n | null, "retry_after_secs": s | null}
//! ```
//!
//! Listing pages are served as stored; the `page_size` argument is ignored.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::client::{CatalogClient, ClientError, DatasetDownload};
use crate::model::{DatasetMeta, NotebookMeta};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    /// Successful notebook fetches after which the next one is refused once.
    #[serde(default)]
    pub rate_limit_after: Option<u64>,
    #[serde(default)]
    pub retry_after_secs: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    ListDatasets { page: u32 },
    DownloadDataset { dataset_ref: String },
    ListKernels { dataset_ref: String, page: u32 },
    FetchNotebook { notebook_ref: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    RateLimited,
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedRequest {
    pub request: Request,
    pub outcome: Outcome,
}

pub struct FixtureClient {
    root: PathBuf,
    scenario: Scenario,
    fetched_since_trip: u64,
    log: Vec<LoggedRequest>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>, ClientError> {
    match fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| ClientError::Transport(format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(ClientError::Transport(format!("{}: {e}", path.display()))),
    }
}

impl FixtureClient {
    pub fn open(root: &Path) -> io::Result<Self> {
        if !root.is_dir() {
            return Err(io::Error::new(
                io::ErrorKind::NotFound,
                format!("fixture directory {} does not exist", root.display()),
            ));
        }
        let scenario = read_json::<Scenario>(&root.join("scenario.json"))
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?
            .unwrap_or_default();
        Ok(Self {
            root: root.to_path_buf(),
            scenario,
            fetched_since_trip: 0,
            log: Vec::new(),
        })
    }

    pub fn request_log(&self) -> &[LoggedRequest] {
        &self.log
    }

    fn log(&mut self, request: Request, outcome: Outcome) {
        self.log.push(LoggedRequest { request, outcome });
    }
}

impl CatalogClient for FixtureClient {
    fn list_datasets(&mut self, page: u32, _page_size: u32) -> Result<Vec<DatasetMeta>, ClientError> {
        let path = self.root.join(format!("datasets_page_{page}.json"));
        let items = read_json(&path)?.unwrap_or_default();
        self.log(Request::ListDatasets { page }, Outcome::Ok);
        Ok(items)
    }

    fn download_dataset(&mut self, dataset_ref: &str) -> Result<DatasetDownload, ClientError> {
        let dir = self.root.join("datasets").join(dataset_ref);
        let request = Request::DownloadDataset {
            dataset_ref: dataset_ref.to_string(),
        };
        let Some(meta) = read_json::<DatasetMeta>(&dir.join("meta.json"))? else {
            self.log(request, Outcome::NotFound);
            return Err(ClientError::NotFound(dataset_ref.to_string()));
        };
        let content = fs::read(dir.join("content.bin")).unwrap_or_default();
        self.log(request, Outcome::Ok);
        Ok(DatasetDownload { meta, content })
    }

    fn list_kernels(
        &mut self,
        dataset_ref: &str,
        page: u32,
        _page_size: u32,
    ) -> Result<Vec<NotebookMeta>, ClientError> {
        let path = self
            .root
            .join("kernels")
            .join(format!("{dataset_ref}_page_{page}.json"));
        let items = read_json(&path)?.unwrap_or_default();
        self.log(
            Request::ListKernels {
                dataset_ref: dataset_ref.to_string(),
                page,
            },
            Outcome::Ok,
        );
        Ok(items)
    }

    fn fetch_notebook(&mut self, notebook_ref: &str) -> Result<String, ClientError> {
        let request = Request::FetchNotebook {
            notebook_ref: notebook_ref.to_string(),
        };
        if let Some(limit) = self.scenario.rate_limit_after {
            if self.fetched_since_trip >= limit {
                self.fetched_since_trip = 0;
                self.log(request, Outcome::RateLimited);
                return Err(ClientError::RateLimited {
                    retry_after: self.scenario.retry_after_secs.map(Duration::from_secs),
                });
            }
        }
        let path = self.root.join("notebooks").join(format!("{notebook_ref}.ipynb"));
        match fs::read_to_string(&path) {
            Ok(text) => {
                self.fetched_since_trip += 1;
                self.log(request, Outcome::Ok);
                Ok(text)
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                self.log(request, Outcome::NotFound);
                Err(ClientError::NotFound(notebook_ref.to_string()))
            }
            Err(e) => Err(ClientError::Transport(e.to_string())),
        }
    }
}

/// In-memory description of a catalog, written out with [`write_catalog`].
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    pub datasets: Vec<DatasetMeta>,
    pub kernels: BTreeMap<String, Vec<NotebookMeta>>,
    pub notebooks: BTreeMap<String, String>,
    pub scenario: Scenario,
    pub page_size: usize,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

pub fn write_catalog(root: &Path, catalog: &Catalog) -> io::Result<()> {
    let page_size = catalog.page_size.max(1);
    for (i, page) in catalog.datasets.chunks(page_size).enumerate() {
        write_json(&root.join(format!("datasets_page_{}.json", i + 1)), &page)?;
    }
    for meta in &catalog.datasets {
        write_json(
            &root.join("datasets").join(&meta.dataset_ref).join("meta.json"),
            meta,
        )?;
    }
    for (dataset_ref, kernels) in &catalog.kernels {
        for (i, page) in kernels.chunks(page_size).enumerate() {
            write_json(
                &root
                    .join("kernels")
                    .join(format!("{dataset_ref}_page_{}.json", i + 1)),
                &page,
            )?;
        }
    }
    for (notebook_ref, text) in &catalog.notebooks {
        let path = root.join("notebooks").join(format!("{notebook_ref}.ipynb"));
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, text)?;
    }
    write_json(&root.join("scenario.json"), &catalog.scenario)
}

/// Minimal nbformat v4 document with one code cell per source string.
pub fn notebook_text(cells: &[&str]) -> String {
    let cells: Vec<_> = cells
        .iter()
        .map(|src| {
            serde_json::json!({
                "cell_type": "code",
                "execution_count": null,
                "metadata": {},
                "outputs": [],
                "source": src,
            })
        })
        .collect();
    let doc = serde_json::json!({
        "cells": cells,
        "metadata": {"kernelspec": {"language": "python", "name": "python3", "display_name": "Python 3"}},
        "nbformat": 4,
        "nbformat_minor": 5,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("static shape");
    text.push('\n');
    text
}

/// Shape of a generated catalog; see [`synthetic_catalog`].
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub datasets: usize,
    pub notebooks_per_dataset: usize,
    pub page_size: usize,
    pub rate_limit_after: Option<u64>,
}

/// Deterministic catalog for crawl tests. Per dataset index `i`:
/// `i % 5 == 3` is too large, `i % 5 == 4` has usability 0.4, the rest pass
/// with the default thresholds. Per notebook index `j`: `j % 6 == 4` has
/// exactly 10 upvotes, `j % 6 == 5` is an R notebook, the rest pass.
pub fn synthetic_catalog(spec: &SyntheticSpec) -> Catalog {
    let mut catalog = Catalog {
        page_size: spec.page_size,
        scenario: Scenario {
            rate_limit_after: spec.rate_limit_after,
            retry_after_secs: None,
        },
        ..Catalog::default()
    };
    for i in 0..spec.datasets {
        let dataset_ref = format!("owner{}/data-{i:04}", i % 7);
        let (size_bytes, usability_score) = match i % 5 {
            3 => (10_000_001, 0.9),
            4 => (1_000, 0.4),
            _ => (1_000 + i as u64 * 10, 0.7 + (i % 3) as f64 * 0.1),
        };
        catalog.datasets.push(DatasetMeta {
            dataset_ref: dataset_ref.clone(),
            size_bytes,
            usability_score,
            title: format!("Dataset {i}"),
        });
        let mut kernels = Vec::new();
        for j in 0..spec.notebooks_per_dataset {
            let notebook_ref = format!("user{}/nb-{i:04}-{j:03}", j % 3);
            let (upvotes, language_tag) = match j % 6 {
                4 => (10, "python"),
                5 => (2, "r"),
                _ => ((j * 7 % 10) as u64, "python"),
            };
            kernels.push(NotebookMeta {
                notebook_ref: notebook_ref.clone(),
                dataset_refs: vec![dataset_ref.clone()],
                upvotes,
                language_tag: language_tag.to_string(),
            });
            catalog.notebooks.insert(
                notebook_ref,
                notebook_text(&[
                    "import pandas as pd",
                    &format!("df = pd.read_csv('data_{i}.csv')"),
                    &format!("df['c{j}'] = df['c{j}'].fillna({j})"),
                ]),
            );
        }
        catalog.kernels.insert(dataset_ref, kernels);
    }
    catalog
}
