use std::time::Duration;

use thiserror::Error;

use crate::config::HarvestConfig;
use crate::model::{DatasetMeta, NotebookMeta};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("rate limited (retry after {retry_after:?})")]
    RateLimited { retry_after: Option<Duration> },
    #[error("page {page} exceeds the cap of {max_pages}")]
    PageLimitExceeded { page: u32, max_pages: u32 },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("transport error: {0}")]
    Transport(String),
}

/// A downloaded dataset: its metadata and raw content (possibly empty).
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetDownload {
    pub meta: DatasetMeta,
    pub content: Vec<u8>,
}

/// The remote catalog. Pages are 1-based; an empty page means the listing is
/// exhausted.
pub trait CatalogClient {
    fn list_datasets(&mut self, page: u32, page_size: u32) -> Result<Vec<DatasetMeta>, ClientError>;
    fn download_dataset(&mut self, dataset_ref: &str) -> Result<DatasetDownload, ClientError>;
    fn list_kernels(
        &mut self,
        dataset_ref: &str,
        page: u32,
        page_size: u32,
    ) -> Result<Vec<NotebookMeta>, ClientError>;
    /// Raw `.ipynb` text.
    fn fetch_notebook(&mut self, notebook_ref: &str) -> Result<String, ClientError>;
}

fn check_page(page: u32, config: &HarvestConfig) -> Result<(), ClientError> {
    if page == 0 || page > config.max_pages {
        return Err(ClientError::PageLimitExceeded {
            page,
            max_pages: config.max_pages,
        });
    }
    Ok(())
}

/// Lists one dataset page, refusing pages beyond the configured cap before
/// any request is made.
pub fn list_datasets(
    client: &mut dyn CatalogClient,
    page: u32,
    config: &HarvestConfig,
) -> Result<Vec<DatasetMeta>, ClientError> {
    check_page(page, config)?;
    client.list_datasets(page, config.page_size)
}

pub fn list_kernels(
    client: &mut dyn CatalogClient,
    dataset_ref: &str,
    page: u32,
    config: &HarvestConfig,
) -> Result<Vec<NotebookMeta>, ClientError> {
    check_page(page, config)?;
    client.list_kernels(dataset_ref, page, config.page_size)
}
