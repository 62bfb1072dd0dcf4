//! Operation taxonomy for frame-touching statements.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imports::ImportTable;
use crate::lineage::FrameState;
use crate::roles::{NameResolver, ValueKind};
use crate::syntax::{self, CallExpr, Expr, Stmt};

/// Canonical call paths that create a dataframe from external data.
pub const READER_PATHS: [&str; 5] = [
    "pandas.read_csv",
    "pandas.read_excel",
    "pandas.read_json",
    "pandas.read_parquet",
    "pandas.DataFrame",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum OperationType {
    AsType,
    Datetime,
    Apply,
    Map,
    Fillna,
    Read,
    Drop,
    Rename,
    Merge,
    /// Outside the taxonomy; serialized as the empty string.
    Unlabeled,
}

impl OperationType {
    /// Every labelled category, in reporting order.
    pub const LABELLED: [OperationType; 9] = [
        OperationType::AsType,
        OperationType::Datetime,
        OperationType::Apply,
        OperationType::Map,
        OperationType::Fillna,
        OperationType::Read,
        OperationType::Drop,
        OperationType::Rename,
        OperationType::Merge,
    ];

    pub fn label(self) -> &'static str {
        match self {
            OperationType::AsType => "as_type",
            OperationType::Datetime => "datetime",
            OperationType::Apply => "apply",
            OperationType::Map => "map",
            OperationType::Fillna => "fillna",
            OperationType::Read => "read",
            OperationType::Drop => "drop",
            OperationType::Rename => "rename",
            OperationType::Merge => "merge",
            OperationType::Unlabeled => "",
        }
    }

    pub fn from_label(label: &str) -> Option<OperationType> {
        if label.is_empty() {
            return Some(OperationType::Unlabeled);
        }
        OperationType::LABELLED
            .into_iter()
            .find(|op| op.label() == label)
    }

    pub fn is_labelled(self) -> bool {
        self != OperationType::Unlabeled
    }

    pub fn takes_transform(self) -> bool {
        matches!(self, OperationType::Map | OperationType::Apply)
    }

    fn from_method(method: &str) -> OperationType {
        match method {
            "astype" => OperationType::AsType,
            "apply" | "applymap" => OperationType::Apply,
            "map" => OperationType::Map,
            "fillna" => OperationType::Fillna,
            "drop" => OperationType::Drop,
            "rename" => OperationType::Rename,
            "merge" | "join" => OperationType::Merge,
            _ => OperationType::Unlabeled,
        }
    }
}

impl fmt::Display for OperationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl From<OperationType> for String {
    fn from(op: OperationType) -> String {
        op.label().to_string()
    }
}

impl TryFrom<String> for OperationType {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        OperationType::from_label(&value).ok_or_else(|| format!("unknown operation type `{value}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformArg {
    pub source: String,
    pub kind: ValueKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifyError {
    #[error("`{method}` call has no positional argument")]
    MissingArgument { method: String },
}

/// The call a statement is "about": the right-hand side of an assignment or
/// the expression of an expression statement, when that is a call. For a
/// chain like `df.fillna(0).astype(int)` this is the outermost call.
pub fn primary_call(stmt: &Stmt) -> Option<&CallExpr> {
    let value = match stmt {
        Stmt::Assign(s) => &s.value,
        Stmt::AugAssign(s) => &s.value,
        Stmt::Expr(s) => &s.value,
        _ => return None,
    };
    match value {
        Expr::Call(c) => Some(c),
        _ => None,
    }
}

pub fn canonical_callee(call: &CallExpr, table: &ImportTable) -> Option<String> {
    call.func
        .dotted_path()
        .and_then(|path| table.canonicalize(&path))
}

pub fn classify_call(call: &CallExpr, state: &FrameState, table: &ImportTable) -> OperationType {
    if let Some(path) = canonical_callee(call, table) {
        if READER_PATHS.contains(&path.as_str()) {
            return OperationType::Read;
        }
        match path.as_str() {
            "pandas.to_datetime" => return OperationType::Datetime,
            "pandas.merge" => return OperationType::Merge,
            _ => {}
        }
    }
    match (call.method_name(), call.receiver()) {
        (Some(method), Some(receiver))
            if receiver.root_name().is_some_and(|r| state.contains(r)) =>
        {
            OperationType::from_method(method)
        }
        _ => OperationType::Unlabeled,
    }
}

/// Taxonomy label of a statement; the outermost call of a chain decides.
pub fn classify(stmt: &Stmt, state: &FrameState, table: &ImportTable) -> OperationType {
    primary_call(stmt)
        .map(|call| classify_call(call, state, table))
        .unwrap_or(OperationType::Unlabeled)
}

/// Labels of calls nested below the primary call in a method chain
/// (`df.fillna(0).astype(int)` yields `[fillna]`), outermost first.
pub fn inner_chain_labels(stmt: &Stmt, state: &FrameState, table: &ImportTable) -> Vec<OperationType> {
    let mut labels = Vec::new();
    let mut cursor = primary_call(stmt).and_then(CallExpr::receiver);
    while let Some(expr) = cursor {
        cursor = match expr {
            Expr::Call(c) => {
                let label = classify_call(c, state, table);
                if label.is_labelled() {
                    labels.push(label);
                }
                c.receiver()
            }
            Expr::Attribute(a) => Some(&a.value),
            Expr::Subscript(s) => Some(&s.value),
            _ => None,
        };
    }
    labels
}

/// First positional argument of a `map`/`apply`/`applymap` primary call.
/// `Ok(None)` when the statement is not such a call.
pub fn extract_transform_arg(
    stmt: &Stmt,
    resolver: &dyn NameResolver,
) -> Result<Option<TransformArg>, ClassifyError> {
    let Some(call) = primary_call(stmt) else {
        return Ok(None);
    };
    let Some(method) = call.method_name() else {
        return Ok(None);
    };
    if !matches!(method, "map" | "apply" | "applymap") {
        return Ok(None);
    }
    let Some(arg) = call.args.first() else {
        return Err(ClassifyError::MissingArgument {
            method: method.to_string(),
        });
    };
    let arg = match arg {
        Expr::Name(n) => {
            let resolved = resolver.resolve_name(&n.id);
            TransformArg {
                source: resolved.source.unwrap_or_else(|| n.id.clone()),
                kind: resolved.role,
            }
        }
        Expr::MappingLiteral(_) => TransformArg {
            source: syntax::render_expr(arg),
            kind: ValueKind::DictionaryLiteral,
        },
        Expr::Lambda(_) => TransformArg {
            source: syntax::render_expr(arg),
            kind: ValueKind::LambdaExpression,
        },
        _ => TransformArg {
            source: syntax::render_expr(arg),
            kind: ValueKind::VariableOther,
        },
    };
    Ok(Some(arg))
}
