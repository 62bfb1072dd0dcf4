//! Kaggle public API v1 client. Credentials come from `KAGGLE_USERNAME` and
//! `KAGGLE_KEY`.

use std::collections::HashMap;
use std::time::Duration;

use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::Value;

use crate::client::{CatalogClient, ClientError, DatasetDownload};
use crate::model::{DatasetMeta, NotebookMeta};

pub const DEFAULT_BASE_URL: &str = "https://www.kaggle.com/api/v1";

#[derive(Debug, Clone)]
pub struct Credentials {
    pub username: String,
    pub key: String,
}

impl Credentials {
    pub fn from_env() -> Option<Self> {
        let username = std::env::var("KAGGLE_USERNAME").ok()?;
        let key = std::env::var("KAGGLE_KEY").ok()?;
        (!username.is_empty() && !key.is_empty()).then_some(Self { username, key })
    }
}

pub struct KaggleClient {
    http: Client,
    base_url: String,
    credentials: Credentials,
    /// Listing metadata by ref; the download endpoint returns only content.
    listed: HashMap<String, DatasetMeta>,
    max_download_bytes: u64,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ApiDataset {
    #[serde(rename = "ref")]
    dataset_ref: String,
    #[serde(default)]
    total_bytes: Option<u64>,
    #[serde(default)]
    usability_rating: Option<f64>,
    #[serde(default)]
    title: Option<String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ApiKernel {
    #[serde(rename = "ref")]
    notebook_ref: String,
    #[serde(default)]
    total_votes: Option<u64>,
    #[serde(default)]
    language: Option<String>,
}

impl KaggleClient {
    pub fn new(credentials: Credentials, max_download_bytes: u64) -> Result<Self, ClientError> {
        Self::with_base_url(credentials, max_download_bytes, DEFAULT_BASE_URL)
    }

    pub fn with_base_url(
        credentials: Credentials,
        max_download_bytes: u64,
        base_url: &str,
    ) -> Result<Self, ClientError> {
        let http = Client::builder()
            .timeout(Duration::from_secs(120))
            .user_agent(concat!("nbwrangle/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(Self {
            http,
            base_url: base_url.trim_end_matches('/').to_string(),
            credentials,
            listed: HashMap::new(),
            max_download_bytes,
        })
    }

    fn get(&self, path: &str, query: &[(&str, String)]) -> Result<Response, ClientError> {
        let response = self
            .http
            .get(format!("{}/{path}", self.base_url))
            .basic_auth(&self.credentials.username, Some(&self.credentials.key))
            .query(query)
            .send()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        check_status(response, path)
    }

    fn get_json<T: for<'de> Deserialize<'de>>(&self, path: &str, query: &[(&str, String)]) -> Result<T, ClientError> {
        self.get(path, query)?
            .json()
            .map_err(|e| ClientError::Transport(format!("{path}: {e}")))
    }
}

fn check_status(response: Response, what: &str) -> Result<Response, ClientError> {
    match response.status() {
        s if s.is_success() => Ok(response),
        StatusCode::TOO_MANY_REQUESTS => Err(ClientError::RateLimited {
            retry_after: response
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs),
        }),
        StatusCode::NOT_FOUND => Err(ClientError::NotFound(what.to_string())),
        s => Err(ClientError::Transport(format!("{what}: HTTP {s}"))),
    }
}

fn owner_slug(reference: &str) -> Result<(&str, &str), ClientError> {
    reference
        .split_once('/')
        .filter(|(o, s)| !o.is_empty() && !s.is_empty() && !s.contains('/'))
        .ok_or_else(|| ClientError::NotFound(format!("malformed ref `{reference}`")))
}

impl CatalogClient for KaggleClient {
    fn list_datasets(&mut self, page: u32, _page_size: u32) -> Result<Vec<DatasetMeta>, ClientError> {
        let items: Vec<ApiDataset> = self.get_json(
            "datasets/list",
            &[
                ("page", page.to_string()),
                ("maxSize", self.max_download_bytes.to_string()),
            ],
        )?;
        let metas: Vec<DatasetMeta> = items
            .into_iter()
            .map(|d| DatasetMeta {
                dataset_ref: d.dataset_ref,
                size_bytes: d.total_bytes.unwrap_or(u64::MAX),
                usability_score: d.usability_rating.unwrap_or(0.0),
                title: d.title.unwrap_or_default(),
            })
            .collect();
        for m in &metas {
            self.listed.insert(m.dataset_ref.clone(), m.clone());
        }
        Ok(metas)
    }

    fn download_dataset(&mut self, dataset_ref: &str) -> Result<DatasetDownload, ClientError> {
        let (owner, slug) = owner_slug(dataset_ref)?;
        let meta = self
            .listed
            .get(dataset_ref)
            .cloned()
            .ok_or_else(|| ClientError::NotFound(format!("{dataset_ref} was never listed")))?;
        let response = self.get(&format!("datasets/download/{owner}/{slug}"), &[])?;
        let content = response
            .bytes()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if content.len() as u64 > self.max_download_bytes.saturating_mul(2) {
            return Err(ClientError::Transport(format!(
                "{dataset_ref}: download of {} bytes exceeds the size bound",
                content.len()
            )));
        }
        Ok(DatasetDownload {
            meta,
            content: content.to_vec(),
        })
    }

    fn list_kernels(
        &mut self,
        dataset_ref: &str,
        page: u32,
        page_size: u32,
    ) -> Result<Vec<NotebookMeta>, ClientError> {
        let items: Vec<ApiKernel> = self.get_json(
            "kernels/list",
            &[
                ("dataset", dataset_ref.to_string()),
                ("page", page.to_string()),
                ("pageSize", page_size.to_string()),
                ("language", "python".to_string()),
                ("kernelType", "notebook".to_string()),
            ],
        )?;
        Ok(items
            .into_iter()
            .map(|k| NotebookMeta {
                notebook_ref: k.notebook_ref,
                dataset_refs: vec![dataset_ref.to_string()],
                upvotes: k.total_votes.unwrap_or(0),
                // The listing is already filtered to python.
                language_tag: k.language.unwrap_or_else(|| "python".to_string()),
            })
            .collect())
    }

    fn fetch_notebook(&mut self, notebook_ref: &str) -> Result<String, ClientError> {
        let (owner, slug) = owner_slug(notebook_ref)?;
        let body: Value = self.get_json(
            "kernels/pull",
            &[("userName", owner.to_string()), ("kernelSlug", slug.to_string())],
        )?;
        body.pointer("/blob/source")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ClientError::Transport(format!("{notebook_ref}: response has no source")))
    }
}
