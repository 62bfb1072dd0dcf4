//! Alias ("nickname") to module bookkeeping for one notebook.

use std::collections::BTreeMap;

use crate::diagnostics::{Category, Note};
use crate::syntax::{self, ImportAlias, ImportFromStmt, ImportStmt, Stmt, SyntaxTree, Visitor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportEntry {
    pub module: String,
    /// Cell that (last) bound the alias.
    pub cell: usize,
}

/// Alias → canonical module path. Later bindings of an alias replace earlier
/// ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImportTable {
    entries: BTreeMap<String, ImportEntry>,
}

impl ImportTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, alias: impl Into<String>, module: impl Into<String>, cell: usize) {
        let module = module.into();
        if module.is_empty() {
            return;
        }
        self.entries
            .insert(alias.into(), ImportEntry { module, cell });
    }

    pub fn get(&self, alias: &str) -> Option<&ImportEntry> {
        self.entries.get(alias)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ImportEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Plain alias → module mapping, as serialized into trace records.
    pub fn to_mapping(&self) -> BTreeMap<String, String> {
        self.entries
            .iter()
            .map(|(k, v)| (k.clone(), v.module.clone()))
            .collect()
    }

    /// Canonical form of a dotted reference such as `pd.read_csv`: the
    /// longest aliased prefix is replaced by its module path. Returns `None`
    /// when no prefix is an imported alias.
    pub fn canonicalize(&self, dotted: &str) -> Option<String> {
        let mut prefix_end = dotted.len();
        loop {
            let prefix = &dotted[..prefix_end];
            if let Some(entry) = self.entries.get(prefix) {
                return Some(format!("{}{}", entry.module, &dotted[prefix_end..]));
            }
            prefix_end = prefix.rfind('.')?;
        }
    }
}

/// Records every import in `tree` (including ones nested in functions or
/// branches) into `table`. Star imports are not expanded; a note is returned
/// for each.
pub fn collect_imports(tree: &SyntaxTree, cell_index: usize, table: &mut ImportTable) -> Vec<Note> {
    tree.statements
        .iter()
        .flat_map(|stmt| collect_statement_imports(stmt, cell_index, table))
        .collect()
}

/// [`collect_imports`] for a single statement and everything nested in it.
pub fn collect_statement_imports(
    stmt: &Stmt,
    cell_index: usize,
    table: &mut ImportTable,
) -> Vec<Note> {
    struct Collector<'a> {
        cell: usize,
        table: &'a mut ImportTable,
        notes: Vec<Note>,
    }

    impl Visitor for Collector<'_> {
        fn visit_import(&mut self, node: &ImportStmt) {
            for ImportAlias { name, asname } in &node.names {
                let alias = asname.clone().unwrap_or_else(|| name.clone());
                self.table.insert(alias, name.clone(), self.cell);
            }
        }

        fn visit_import_from(&mut self, node: &ImportFromStmt) {
            let base = format!(
                "{}{}",
                ".".repeat(node.level as usize),
                node.module.as_deref().unwrap_or("")
            );
            for ImportAlias { name, asname } in &node.names {
                if name == "*" {
                    self.notes.push(Note::new(
                        self.cell,
                        Category::StarImport,
                        format!("star import from `{base}` not expanded"),
                    ));
                    continue;
                }
                let module = if base.is_empty() || base.ends_with('.') {
                    format!("{base}{name}")
                } else {
                    format!("{base}.{name}")
                };
                let alias = asname.clone().unwrap_or_else(|| name.clone());
                self.table.insert(alias, module, self.cell);
            }
        }
    }

    let mut collector = Collector {
        cell: cell_index,
        table,
        notes: Vec::new(),
    };
    syntax::walk_stmt(stmt, &mut collector);
    collector.notes
}

pub fn resolve_alias<'a>(table: &'a ImportTable, name: &str) -> Option<&'a str> {
    table.get(name).map(|e| e.module.as_str())
}

/// The table entries whose alias is mentioned by name inside `stmt`. Dotted
/// aliases (`import matplotlib.pyplot`) match on their first component.
pub fn imports_referenced_by(stmt: &Stmt, table: &ImportTable) -> BTreeMap<String, String> {
    let names = syntax::names_in_stmt(stmt);
    table
        .iter()
        .filter(|(alias, _)| {
            let head = alias.split('.').next().unwrap_or(alias);
            names.iter().any(|n| n == head)
        })
        .map(|(alias, entry)| (alias.to_string(), entry.module.clone()))
        .collect()
}
