//! Notebook to trace conversion over a worker pool.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nbwrangle_core::diagnostics::{Category, Diagnostic};
use nbwrangle_core::ingest::IngestError;
use nbwrangle_core::lineage::{self, NotebookTrace, SnippetRecord};
use nbwrangle_core::report::{self, TraceManifest, TRACE_SUFFIX};
use rayon::prelude::*;
use walkdir::WalkDir;

pub const DIAGNOSTICS_FILE: &str = "diagnostics.jsonl";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvertJob {
    pub path: PathBuf,
    pub notebook_ref: String,
    pub dataset_ref: String,
}

#[derive(Debug, Default)]
pub struct ConvertSummary {
    pub traces_written: usize,
    pub skipped: usize,
    pub diagnostics: Vec<Diagnostic>,
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Expands inputs into jobs. A file is its own ref; a directory contributes
/// every `.ipynb` below it, keyed by relative path. Without `dataset`, a
/// notebook's dataset is its parent directory's name.
pub fn discover(inputs: &[PathBuf], dataset: Option<&str>) -> Vec<ConvertJob> {
    let mut jobs = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = WalkDir::new(input)
                .into_iter()
                .filter_map(Result::ok)
                .filter(|e| e.file_type().is_file())
                .map(|e| e.into_path())
                .filter(|p| p.extension().is_some_and(|x| x == "ipynb"))
                .collect();
            found.sort();
            for path in found {
                let rel = path.strip_prefix(input).unwrap_or(&path);
                let notebook_ref = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                let parent = path.parent().unwrap_or(input);
                jobs.push(ConvertJob {
                    dataset_ref: dataset
                        .map(str::to_string)
                        .unwrap_or_else(|| parent.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())),
                    notebook_ref,
                    path,
                });
            }
        } else {
            let name = input
                .file_name()
                .map_or_else(|| input.display().to_string(), |n| n.to_string_lossy().into_owned());
            jobs.push(ConvertJob {
                dataset_ref: dataset.map_or_else(|| file_stem(input), str::to_string),
                notebook_ref: name,
                path: input.clone(),
            });
        }
    }
    jobs
}

fn convert_one(job: &ConvertJob) -> Result<NotebookTrace, Diagnostic> {
    let skip = |category, message: String| Diagnostic::new(&job.notebook_ref, None, category, message);
    let raw = fs::read_to_string(&job.path).map_err(|e| {
        skip(
            Category::MalformedNotebook,
            format!("cannot read {}: {e}", job.path.display()),
        )
    })?;
    lineage::convert_raw(&raw, &job.notebook_ref).map_err(|e| match e {
        IngestError::MalformedNotebook(_) => skip(Category::MalformedNotebook, e.to_string()),
        IngestError::UnsupportedKernel(_) => skip(Category::UnsupportedKernel, e.to_string()),
    })
}

/// Converts `jobs` on `workers` threads and writes `traces/`, its manifest
/// and `diagnostics.jsonl` under `out_dir`. Output order follows `jobs`
/// regardless of scheduling. Unreadable notebooks are skipped with a
/// diagnostic.
pub fn convert(jobs: &[ConvertJob], out_dir: &Path, workers: usize) -> Result<ConvertSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("building the worker pool")?;
    let results: Vec<Result<NotebookTrace, Diagnostic>> =
        pool.install(|| jobs.par_iter().map(convert_one).collect());

    let traces_dir = out_dir.join("traces");
    let mut manifest = TraceManifest::load(&traces_dir)?;
    let mut summary = ConvertSummary::default();
    for (job, result) in jobs.iter().zip(results) {
        let trace = match result {
            Ok(trace) => trace,
            Err(diagnostic) => {
                tracing::warn!(notebook = %job.notebook_ref, "{}", diagnostic.message);
                summary.skipped += 1;
                summary.diagnostics.push(diagnostic);
                continue;
            }
        };
        let existing = manifest
            .entries
            .iter()
            .find(|(_, e)| e.notebook_ref == job.notebook_ref && e.dataset_ref == job.dataset_ref)
            .map(|(stem, _)| stem.clone());
        let stem = match existing {
            Some(stem) => stem,
            None => {
                let (stem, collided) = manifest.assign(&job.notebook_ref, &job.dataset_ref);
                if collided {
                    summary.diagnostics.push(Diagnostic::new(
                        &job.notebook_ref,
                        None,
                        Category::DuplicateStem,
                        format!("trace stem taken; written as {stem}{TRACE_SUFFIX}"),
                    ));
                }
                stem
            }
        };
        let records: Vec<SnippetRecord> = trace.records().cloned().collect();
        report::write_trace(&records, &traces_dir.join(format!("{stem}{TRACE_SUFFIX}")))?;
        summary.traces_written += 1;
        summary.diagnostics.extend(trace.diagnostics);
    }
    manifest.write(&traces_dir)?;

    let diag_path = out_dir.join(DIAGNOSTICS_FILE);
    let file = fs::File::create(&diag_path)
        .with_context(|| format!("creating {}", diag_path.display()))?;
    let mut writer = std::io::BufWriter::new(file);
    report::write_diagnostics_jsonl(&summary.diagnostics, &mut writer)
        .and_then(|()| std::io::Write::flush(&mut writer))
        .with_context(|| format!("writing {}", diag_path.display()))?;
    Ok(summary)
}
