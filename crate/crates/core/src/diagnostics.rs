use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    MalformedNotebook,
    UnsupportedKernel,
    DroppedLine,
    SyntaxError,
    LoopBody,
    StarImport,
    ChainedCall,
    MissingArgument,
    DuplicateStem,
}

/// One line of `diagnostics.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub notebook_ref: String,
    pub cell: Option<usize>,
    pub category: Category,
    pub message: String,
}

impl Diagnostic {
    pub fn new(
        notebook_ref: impl Into<String>,
        cell: Option<usize>,
        category: Category,
        message: impl Into<String>,
    ) -> Self {
        Self {
            notebook_ref: notebook_ref.into(),
            cell,
            category,
            message: message.into(),
        }
    }
}

/// Cell-scoped finding raised by an analysis pass before it is attached to a
/// notebook.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Note {
    pub cell: usize,
    pub category: Category,
    pub message: String,
}

impl Note {
    pub fn new(cell: usize, category: Category, message: impl Into<String>) -> Self {
        Self {
            cell,
            category,
            message: message.into(),
        }
    }

    pub fn into_diagnostic(self, notebook_ref: &str) -> Diagnostic {
        Diagnostic::new(notebook_ref, Some(self.cell), self.category, self.message)
    }
}
