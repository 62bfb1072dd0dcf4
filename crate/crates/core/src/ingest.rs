//! Reading `.ipynb` documents into ordered, sanitized code cells.

use serde_json::Value;
use thiserror::Error;

/// Kernel language the analyses understand.
pub const TARGET_LANGUAGE: &str = "python";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IngestError {
    #[error("malformed notebook: {0}")]
    MalformedNotebook(String),
    #[error("unsupported kernel language `{0}`")]
    UnsupportedKernel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Code,
    Markdown,
    Raw,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    /// Position in the notebook's full `cells` array.
    pub index: usize,
    pub kind: CellKind,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotebookDocument {
    pub notebook_ref: String,
    pub cells: Vec<Cell>,
    pub kernel_language: String,
}

/// Parses nbformat v4 JSON. Cells keep their document order and their index
/// in the full cell array, whatever their kind.
pub fn parse_notebook(raw: &str, notebook_ref: &str) -> Result<NotebookDocument, IngestError> {
    let doc: Value = serde_json::from_str(raw)
        .map_err(|e| IngestError::MalformedNotebook(format!("invalid JSON: {e}")))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| IngestError::MalformedNotebook("top level is not an object".into()))?;
    match obj.get("nbformat").and_then(Value::as_u64) {
        Some(4) => {}
        Some(v) => {
            return Err(IngestError::MalformedNotebook(format!(
                "nbformat {v} is not supported"
            )))
        }
        None => {
            return Err(IngestError::MalformedNotebook(
                "missing integer `nbformat`".into(),
            ))
        }
    }

    let kernel_language = kernel_language(obj.get("metadata"));
    if !kernel_language.eq_ignore_ascii_case(TARGET_LANGUAGE) {
        return Err(IngestError::UnsupportedKernel(kernel_language));
    }

    let raw_cells = obj
        .get("cells")
        .and_then(Value::as_array)
        .ok_or_else(|| IngestError::MalformedNotebook("missing `cells` array".into()))?;
    let cells = raw_cells
        .iter()
        .enumerate()
        .map(|(index, cell)| parse_cell(index, cell))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(NotebookDocument {
        notebook_ref: notebook_ref.to_string(),
        cells,
        kernel_language,
    })
}

fn kernel_language(metadata: Option<&Value>) -> String {
    let Some(meta) = metadata else {
        return TARGET_LANGUAGE.to_string();
    };
    meta.pointer("/kernelspec/language")
        .or_else(|| meta.pointer("/language_info/name"))
        .and_then(Value::as_str)
        .unwrap_or(TARGET_LANGUAGE)
        .to_string()
}

fn parse_cell(index: usize, cell: &Value) -> Result<Cell, IngestError> {
    let malformed = |what: &str| IngestError::MalformedNotebook(format!("cell {index}: {what}"));
    let kind = match cell.get("cell_type").and_then(Value::as_str) {
        Some("code") => CellKind::Code,
        Some("markdown") => CellKind::Markdown,
        Some("raw") => CellKind::Raw,
        Some(_) => CellKind::Other,
        None => return Err(malformed("missing `cell_type`")),
    };
    // nbformat multiline strings: either one string or a list of lines that
    // already carry their newlines.
    let source = match cell.get("source") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Array(parts)) => parts
            .iter()
            .map(|p| p.as_str().ok_or_else(|| malformed("non-string source line")))
            .collect::<Result<String, _>>()?,
        Some(_) => return Err(malformed("`source` is neither string nor list")),
        None => return Err(malformed("missing `source`")),
    };
    Ok(Cell {
        index,
        kind,
        source,
    })
}

pub fn extract_code_cells(nb: &NotebookDocument) -> Vec<Cell> {
    nb.cells
        .iter()
        .filter(|c| c.kind == CellKind::Code)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedLine {
    /// 1-based line number within the cell.
    pub line: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SanitizedSource {
    pub text: String,
    pub dropped: Vec<DroppedLine>,
}

/// Removes IPython magics (`%`, `%%`) and shell escapes (`!`).
pub fn sanitize_cell(cell: &Cell) -> SanitizedSource {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (i, line) in cell.source.split('\n').enumerate() {
        let head = line.trim_start();
        if head.starts_with('%') || head.starts_with('!') {
            dropped.push(DroppedLine {
                line: i + 1,
                text: line.to_string(),
            });
        } else {
            kept.push(line);
        }
    }
    SanitizedSource {
        text: kept.join("\n"),
        dropped,
    }
}
