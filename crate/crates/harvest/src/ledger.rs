//! Append-only crawl ledger: one JSON object per line, flushed on every
//! write so a crash loses nothing already committed.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LedgerEntry {
    Dataset {
        #[serde(rename = "ref")]
        dataset_ref: String,
        complete: bool,
    },
    Notebook {
        #[serde(rename = "ref")]
        notebook_ref: String,
        dataset_ref: String,
        path: String,
    },
    Cursor { query: String, page: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredNotebook {
    pub notebook_ref: String,
    pub dataset_ref: String,
    pub path: String,
}

#[derive(Debug, Default)]
pub struct CrawlLedger {
    path: Option<PathBuf>,
    file: Option<File>,
    visited_datasets: BTreeSet<String>,
    complete_datasets: BTreeSet<String>,
    notebooks: Vec<StoredNotebook>,
    visited_notebooks: BTreeSet<String>,
    cursors: BTreeMap<String, u32>,
}

impl CrawlLedger {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) the ledger at `path` and replays it. A
    /// truncated final line, left by a crash mid-write, is ignored.
    pub fn open(path: &Path) -> io::Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let mut ledger = Self {
            path: Some(path.to_path_buf()),
            ..Self::default()
        };
        if path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(path)?)
                .lines()
                .collect::<io::Result<_>>()?;
            let last = lines.len().saturating_sub(1);
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<LedgerEntry>(line) {
                    Ok(entry) => ledger.apply(entry),
                    Err(e) if i == last => {
                        tracing::warn!("ignoring truncated ledger tail: {e}");
                    }
                    Err(e) => {
                        return Err(io::Error::new(
                            io::ErrorKind::InvalidData,
                            format!("{}:{}: {e}", path.display(), i + 1),
                        ))
                    }
                }
            }
        }
        // Drop a torn tail so the next entry starts on a clean line.
        if path.exists() {
            let bytes = fs::read(path)?;
            if bytes.last().is_some_and(|b| *b != b'\n') {
                let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
                OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        ledger.file = Some(file);
        Ok(ledger)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn apply(&mut self, entry: LedgerEntry) {
        match entry {
            LedgerEntry::Dataset {
                dataset_ref,
                complete,
            } => {
                if complete {
                    self.complete_datasets.insert(dataset_ref.clone());
                }
                self.visited_datasets.insert(dataset_ref);
            }
            LedgerEntry::Notebook {
                notebook_ref,
                dataset_ref,
                path,
            } => {
                if self.visited_notebooks.insert(notebook_ref.clone()) {
                    self.notebooks.push(StoredNotebook {
                        notebook_ref,
                        dataset_ref,
                        path,
                    });
                }
            }
            LedgerEntry::Cursor { query, page } => {
                let slot = self.cursors.entry(query).or_insert(page);
                *slot = (*slot).max(page);
            }
        }
    }

    fn append(&mut self, entry: LedgerEntry) -> io::Result<()> {
        if let Some(file) = &mut self.file {
            let mut line = serde_json::to_string(&entry).map_err(io::Error::other)?;
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
            file.sync_data()?;
        }
        self.apply(entry);
        Ok(())
    }

    pub fn record_dataset(&mut self, dataset_ref: &str, complete: bool) -> io::Result<()> {
        self.append(LedgerEntry::Dataset {
            dataset_ref: dataset_ref.to_string(),
            complete,
        })
    }

    pub fn record_notebook(&mut self, notebook_ref: &str, dataset_ref: &str, path: &str) -> io::Result<()> {
        self.append(LedgerEntry::Notebook {
            notebook_ref: notebook_ref.to_string(),
            dataset_ref: dataset_ref.to_string(),
            path: path.to_string(),
        })
    }

    /// Records that pages before `next_page` of `query` are fully handled.
    pub fn record_cursor(&mut self, query: &str, next_page: u32) -> io::Result<()> {
        if self.cursor(query).is_some_and(|p| p >= next_page) {
            return Ok(());
        }
        self.append(LedgerEntry::Cursor {
            query: query.to_string(),
            page: next_page,
        })
    }

    pub fn has_dataset(&self, dataset_ref: &str) -> bool {
        self.visited_datasets.contains(dataset_ref)
    }

    pub fn dataset_complete(&self, dataset_ref: &str) -> bool {
        self.complete_datasets.contains(dataset_ref)
    }

    pub fn has_notebook(&self, notebook_ref: &str) -> bool {
        self.visited_notebooks.contains(notebook_ref)
    }

    pub fn cursor(&self, query: &str) -> Option<u32> {
        self.cursors.get(query).copied()
    }

    /// Every stored notebook in fetch order.
    pub fn notebooks(&self) -> &[StoredNotebook] {
        &self.notebooks
    }

    pub fn notebook_count(&self) -> usize {
        self.notebooks.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reload_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        {
            let mut l = CrawlLedger::open(&path).unwrap();
            l.record_dataset("o/d", false).unwrap();
            l.record_notebook("o/n", "o/d", "out/o/d/o/n.ipynb").unwrap();
            l.record_cursor("datasets", 3).unwrap();
            l.record_dataset("o/d", true).unwrap();
        }
        let l = CrawlLedger::open(&path).unwrap();
        assert!(l.has_dataset("o/d"));
        assert!(l.dataset_complete("o/d"));
        assert!(l.has_notebook("o/n"));
        assert_eq!(l.cursor("datasets"), Some(3));
        assert_eq!(l.notebook_count(), 1);
    }

    #[test]
    fn entries_are_tagged_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.jsonl");
        let mut l = CrawlLedger::open(&path).unwrap();
        l.record_notebook("a/b", "c/d", "p").unwrap();
        l.record_cursor("kernels:c/d", 2).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "{\"kind\":\"notebook\",\"ref\":\"a/b\",\"dataset_ref\":\"c/d\",\"path\":\"p\"}\n{\"kind\":\"cursor\",\"query\":\"kernels:c/d\",\"page\":2}\n"
        );
    }

    #[test]
    fn cursor_never_moves_back() {
        let mut l = CrawlLedger::in_memory();
        l.record_cursor("q", 5).unwrap();
        l.record_cursor("q", 2).unwrap();
        assert_eq!(l.cursor("q"), Some(5));
    }

    #[test]
    fn truncated_tail_is_tolerated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.jsonl");
        fs::write(
            &path,
            "{\"kind\":\"dataset\",\"ref\":\"o/d\",\"complete\":false}\n{\"kind\":\"notebook\",\"ref\":\"o/",
        )
        .unwrap();
        let mut l = CrawlLedger::open(&path).unwrap();
        assert!(l.has_dataset("o/d"));
        assert_eq!(l.notebook_count(), 0);
        l.record_notebook("o/n", "o/d", "p").unwrap();
        let reopened = CrawlLedger::open(&path).unwrap();
        assert!(reopened.has_notebook("o/n"));
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.jsonl");
        fs::write(&path, "garbage\n{\"kind\":\"cursor\",\"query\":\"q\",\"page\":1}\n").unwrap();
        assert!(CrawlLedger::open(&path).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn replay_keeps_every_flushed_entry(
                refs in prop::collection::vec("[a-c]/[a-c]{1,2}", 0..20)
            ) {
                let dir = tempfile::tempdir().unwrap();
                let path = dir.path().join("l.jsonl");
                let mut distinct = BTreeSet::new();
                {
                    let mut l = CrawlLedger::open(&path).unwrap();
                    for r in &refs {
                        l.record_notebook(r, "d/d", "p").unwrap();
                        distinct.insert(r.clone());
                    }
                }
                let l = CrawlLedger::open(&path).unwrap();
                prop_assert_eq!(l.notebook_count(), distinct.len());
                for r in &distinct {
                    prop_assert!(l.has_notebook(r));
                }
            }
        }
    }
}
