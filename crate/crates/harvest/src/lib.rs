//! Dataset-first notebook harvesting: list datasets, keep the small and
//! usable ones, then pull the low-upvote notebooks that use them.

pub mod backoff;
pub mod client;
pub mod config;
pub mod crawl;
pub mod filter;
pub mod fixture;
pub mod ledger;
pub mod live;
pub mod model;

pub use client::{CatalogClient, ClientError};
pub use config::HarvestConfig;
pub use crawl::{run_harvest, HarvestError, HarvestResult};
pub use ledger::CrawlLedger;
pub use model::{DatasetMeta, NotebookMeta};
