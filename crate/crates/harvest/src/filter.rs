use std::fmt;

use crate::config::HarvestConfig;
use crate::ledger::CrawlLedger;
use crate::model::{DatasetMeta, NotebookMeta};

pub const TARGET_LANGUAGE: &str = "python";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    Size,
    Usability,
    Upvotes,
    Language,
    Duplicate,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rejection::Size => "size",
            Rejection::Usability => "usability",
            Rejection::Upvotes => "upvotes",
            Rejection::Language => "language",
            Rejection::Duplicate => "duplicate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject(Rejection),
}

impl Decision {
    pub fn is_accept(self) -> bool {
        self == Decision::Accept
    }
}

pub fn accept_dataset(meta: &DatasetMeta, config: &HarvestConfig) -> Decision {
    if meta.size_bytes > config.max_dataset_bytes {
        Decision::Reject(Rejection::Size)
    } else if meta.usability_score < config.min_usability_score {
        Decision::Reject(Rejection::Usability)
    } else {
        Decision::Accept
    }
}

pub fn accept_notebook(meta: &NotebookMeta, config: &HarvestConfig, ledger: &CrawlLedger) -> Decision {
    if meta.upvotes >= config.max_upvotes_exclusive {
        Decision::Reject(Rejection::Upvotes)
    } else if !meta.language_tag.eq_ignore_ascii_case(TARGET_LANGUAGE) {
        Decision::Reject(Rejection::Language)
    } else if ledger.has_notebook(&meta.notebook_ref) {
        Decision::Reject(Rejection::Duplicate)
    } else {
        Decision::Accept
    }
}
