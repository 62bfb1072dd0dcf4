//! Trace files, the corpus summary table and statistics, and the diagnostics
//! log.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::Diagnostic;
use crate::lineage::SnippetRecord;
use crate::ops::{self, OperationType};
use crate::roles::{NameResolver, ValueKind, VariableDescriptor};
use crate::syntax;

pub const SUMMARY_HEADER: [&str; 8] = [
    "dataset_name",
    "notebook_ref",
    "snippet_cell_number",
    "operation_type",
    "prev_df",
    "new_df",
    "transform_arg_kind",
    "transform_arg_source",
];

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRACE_SUFFIX: &str = ".trace.json";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("I/O failure on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("CSV write failed: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A notebook's records together with where they came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceDocument {
    pub notebook_ref: String,
    pub dataset_name: String,
    pub records: Vec<SnippetRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset_name: String,
    pub notebook_ref: String,
    pub snippet_cell_number: usize,
    pub operation_type: OperationType,
    pub prev_df: Option<String>,
    pub new_df: Option<String>,
    pub transform_arg_kind: Option<ValueKind>,
    pub transform_arg_source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub notebooks_processed: usize,
    pub records_total: usize,
    pub counts_by_operation_type: BTreeMap<String, usize>,
    pub counts_by_value_kind: BTreeMap<String, usize>,
    pub distinct_datasets: usize,
}

impl Default for CorpusStats {
    fn default() -> Self {
        Self {
            notebooks_processed: 0,
            records_total: 0,
            counts_by_operation_type: OperationType::LABELLED
                .iter()
                .map(|op| (op.label().to_string(), 0))
                .collect(),
            counts_by_value_kind: ValueKind::ALL
                .iter()
                .map(|k| (k.as_str().to_string(), 0))
                .collect(),
            distinct_datasets: 0,
        }
    }
}

// ---------------------------------------------------------------------------
// Traces

/// Pretty JSON array (two-space indent) with a trailing newline.
pub fn render_trace(records: &[SnippetRecord]) -> String {
    let mut text = serde_json::to_string_pretty(records).expect("records always serialize");
    text.push('\n');
    text
}

pub fn write_trace(records: &[SnippetRecord], path: &Path) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, render_trace(records)).map_err(io_err(path))
}

pub fn read_trace(path: &Path) -> Result<Vec<SnippetRecord>, ReportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| ReportError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// File stem for a notebook ref: path separators become `__`, and anything
/// outside `[A-Za-z0-9._-]` becomes `_`.
pub fn trace_stem(notebook_ref: &str) -> String {
    let trimmed = notebook_ref
        .strip_suffix(".ipynb")
        .unwrap_or(notebook_ref);
    trimmed
        .split(['/', '\\'])
        .filter(|part| !part.is_empty())
        .map(|part| {
            part.chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                        c
                    } else {
                        '_'
                    }
                })
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join("__")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub notebook_ref: String,
    pub dataset_ref: String,
}

/// `traces/manifest.json`: trace stem → origin of the trace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TraceManifest {
    pub entries: BTreeMap<String, ManifestEntry>,
}

impl TraceManifest {
    /// Registers a notebook and returns its unique stem. Collisions get a
    /// numeric suffix; the second value reports whether that happened.
    pub fn assign(&mut self, notebook_ref: &str, dataset_ref: &str) -> (String, bool) {
        let base = trace_stem(notebook_ref);
        let base = if base.is_empty() { "notebook".to_string() } else { base };
        let mut stem = base.clone();
        let mut n = 1;
        while self.entries.contains_key(&stem) {
            n += 1;
            stem = format!("{base}-{n}");
        }
        self.entries.insert(
            stem.clone(),
            ManifestEntry {
                notebook_ref: notebook_ref.to_string(),
                dataset_ref: dataset_ref.to_string(),
            },
        );
        (stem, n > 1)
    }

    pub fn load(dir: &Path) -> Result<Self, ReportError> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|source| ReportError::Json { path, source })
    }

    pub fn write(&self, dir: &Path) -> Result<(), ReportError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest always serializes");
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))
    }
}

/// Reads every `*.trace.json` under `dir`. Traces missing from the manifest
/// use their stem as notebook ref and dataset name.
pub fn load_trace_dir(dir: &Path) -> Result<Vec<TraceDocument>, ReportError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let manifest = TraceManifest::load(dir)?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(TRACE_SUFFIX))
        })
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let stem = name.strip_suffix(TRACE_SUFFIX).unwrap_or(name);
            let (notebook_ref, dataset_name) = match manifest.entries.get(stem) {
                Some(e) => (e.notebook_ref.clone(), e.dataset_ref.clone()),
                None => (stem.to_string(), stem.to_string()),
            };
            Ok(TraceDocument {
                notebook_ref,
                dataset_name,
                records: read_trace(&path)?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Summary

/// Resolves names against a record's own `required_variables`, so transform
/// arguments can be classified from a trace file alone.
struct RecordVariables<'a>(&'a BTreeMap<String, VariableDescriptor>);

impl NameResolver for RecordVariables<'_> {
    fn resolve_name(&self, name: &str) -> VariableDescriptor {
        self.0.get(name).cloned().unwrap_or(VariableDescriptor {
            role: ValueKind::VariableOther,
            source: None,
        })
    }
}

fn transform_arg(record: &SnippetRecord) -> Option<ops::TransformArg> {
    if !record.operation_type.takes_transform() {
        return None;
    }
    let tree = syntax::parse_module(&record.code).ok()?;
    let stmt = tree.statements.first()?;
    ops::extract_transform_arg(stmt, &RecordVariables(&record.required_variables))
        .ok()
        .flatten()
}

pub fn summarize(traces: &[TraceDocument]) -> (Vec<SummaryRow>, CorpusStats) {
    let mut stats = CorpusStats {
        notebooks_processed: traces.len(),
        ..CorpusStats::default()
    };
    let mut keyed = Vec::new();
    let mut datasets = BTreeSet::new();

    for trace in traces {
        datasets.insert(trace.dataset_name.as_str());
        stats.records_total += trace.records.len();
        for (order, record) in trace.records.iter().enumerate() {
            if !record.operation_type.is_labelled() {
                continue;
            }
            *stats
                .counts_by_operation_type
                .entry(record.operation_type.label().to_string())
                .or_default() += 1;
            let arg = transform_arg(record);
            if let Some(arg) = &arg {
                *stats
                    .counts_by_value_kind
                    .entry(arg.kind.as_str().to_string())
                    .or_default() += 1;
            }
            let row = SummaryRow {
                dataset_name: trace.dataset_name.clone(),
                notebook_ref: trace.notebook_ref.clone(),
                snippet_cell_number: record.snippet_cell_number,
                operation_type: record.operation_type,
                prev_df: record.prev_df.clone(),
                new_df: record.new_df.clone(),
                transform_arg_kind: arg.as_ref().map(|a| a.kind),
                transform_arg_source: arg.map(|a| a.source),
            };
            keyed.push((order, row));
        }
    }
    if stats.records_total > 0 {
        stats.distinct_datasets = datasets.len();
    }

    keyed.sort_by(|(oa, a), (ob, b)| {
        (&a.dataset_name, &a.notebook_ref, a.snippet_cell_number, oa).cmp(&(
            &b.dataset_name,
            &b.notebook_ref,
            b.snippet_cell_number,
            ob,
        ))
    });
    (keyed.into_iter().map(|(_, row)| row).collect(), stats)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], sink: W) -> Result<(), ReportError> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(sink);
    out.write_record(SUMMARY_HEADER)?;
    for row in rows {
        out.write_record([
            row.dataset_name.as_str(),
            row.notebook_ref.as_str(),
            &row.snippet_cell_number.to_string(),
            row.operation_type.label(),
            row.prev_df.as_deref().unwrap_or(""),
            row.new_df.as_deref().unwrap_or(""),
            row.transform_arg_kind.map(ValueKind::as_str).unwrap_or(""),
            row.transform_arg_source.as_deref().unwrap_or(""),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn render_stats(stats: &CorpusStats) -> String {
    let mut text = serde_json::to_string_pretty(stats).expect("stats always serialize");
    text.push('\n');
    text
}

pub fn write_stats_json<W: Write>(stats: &CorpusStats, mut sink: W) -> io::Result<()> {
    sink.write_all(render_stats(stats).as_bytes())
}

pub fn write_diagnostics_jsonl<W: Write>(diagnostics: &[Diagnostic], mut sink: W) -> io::Result<()> {
    for d in diagnostics {
        serde_json::to_writer(&mut sink, d)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes `summary.csv` and `stats.json` into `out_dir`.
pub fn write_report(out_dir: &Path, rows: &[SummaryRow], stats: &CorpusStats) -> Result<(), ReportError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let csv_path = out_dir.join("summary.csv");
    let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    write_summary_csv(rows, file)?;
    let stats_path = out_dir.join("stats.json");
    fs::write(&stats_path, render_stats(stats)).map_err(io_err(&stats_path))
}
