//! Static dataframe lineage: which statements create, read or modify a
//! dataframe, and the trace record emitted for each of them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Category, Diagnostic, Note};
use crate::imports::{self, ImportTable};
use crate::ingest::{self, IngestError, NotebookDocument};
use crate::ops::{self, OperationType, READER_PATHS};
use crate::roles::{RoleIndex, VariableDescriptor, ValueKind};
use crate::syntax::{
    self, CallExpr, ConstValue, Expr, LambdaExpr, OtherExpr, Stmt, SyntaxTree, Visitor,
};

/// Pandas functions whose result is a new frame built from frame arguments.
const FRAME_COMBINATORS: [&str; 6] = [
    "pandas.merge",
    "pandas.concat",
    "pandas.get_dummies",
    "pandas.pivot_table",
    "pandas.crosstab",
    "pandas.melt",
];

/// DataFrame methods that identify an otherwise unknown receiver as a frame.
const FRAME_METHODS: [&str; 16] = [
    "head", "tail", "describe", "info", "sample", "astype", "fillna", "dropna", "drop", "rename",
    "merge", "join", "apply", "applymap", "groupby", "value_counts",
];

/// Frame methods whose result is not itself tabular.
const NON_FRAME_METHODS: [&str; 20] = [
    "to_csv", "to_excel", "to_json", "to_parquet", "to_pickle", "to_sql", "to_dict", "to_numpy",
    "to_list", "tolist", "info", "plot", "hist", "boxplot", "nunique", "count", "item", "any",
    "all", "memory_usage",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameInfo {
    pub creation_cell: usize,
    pub source_dataset: Option<String>,
    pub last_modified_cell: usize,
    pub derived_from: Option<String>,
}

impl FrameInfo {
    pub fn created(cell: usize, source_dataset: Option<String>) -> Self {
        Self {
            creation_cell: cell,
            source_dataset,
            last_modified_cell: cell,
            derived_from: None,
        }
    }
}

/// Dataframes known at a point in the notebook.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameState {
    frames: BTreeMap<String, FrameInfo>,
}

impl FrameState {
    pub fn contains(&self, name: &str) -> bool {
        self.frames.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<&FrameInfo> {
        self.frames.get(name)
    }

    pub fn insert(&mut self, name: impl Into<String>, info: FrameInfo) {
        self.frames.insert(name.into(), info);
    }

    pub fn remove(&mut self, name: &str) -> Option<FrameInfo> {
        self.frames.remove(name)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FrameInfo)> {
        self.frames.iter().map(|(k, v)| (k.as_str(), v))
    }

    fn touch(&mut self, name: &str, cell: usize) {
        if let Some(info) = self.frames.get_mut(name) {
            info.last_modified_cell = info.last_modified_cell.max(cell);
        }
    }
}

/// One entry of a notebook trace. Field order is the serialized order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetRecord {
    pub operation_type: OperationType,
    pub new_df: Option<String>,
    pub prev_df: Option<String>,
    pub code: String,
    pub required_variables: BTreeMap<String, VariableDescriptor>,
    pub imports: BTreeMap<String, String>,
    pub snippet_cell_number: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub cell: usize,
    /// Ordinal of the analyzed statement within its cell, nested statements
    /// included.
    pub statement_index: usize,
    pub record: SnippetRecord,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NotebookTrace {
    pub notebook_ref: String,
    pub entries: Vec<TraceEntry>,
    pub diagnostics: Vec<Diagnostic>,
}

impl NotebookTrace {
    pub fn records(&self) -> impl Iterator<Item = &SnippetRecord> {
        self.entries.iter().map(|e| &e.record)
    }
}

// ---------------------------------------------------------------------------
// Frame creation

#[derive(Debug, Clone, PartialEq, Eq)]
struct Origin {
    source_dataset: Option<String>,
    derived_from: Option<String>,
}

/// Whether `expr` evaluates to a (derived) dataframe, and from which frame.
fn frame_root<'e>(expr: &'e Expr, state: &FrameState) -> Option<&'e str> {
    match expr {
        Expr::Name(n) if state.contains(&n.id) => Some(&n.id),
        Expr::Call(c) => match c.func.as_ref() {
            Expr::Attribute(a) if !NON_FRAME_METHODS.contains(&a.attr.as_str()) => {
                frame_root(&a.value, state)
            }
            _ => None,
        },
        Expr::Attribute(a) if matches!(a.attr.as_str(), "loc" | "iloc" | "T") => {
            frame_root(&a.value, state)
        }
        Expr::Subscript(s) => {
            // `df['col']` and `df.iloc[0]` select a single column/row.
            let single = matches!(s.index.as_ref(), Expr::Constant(c)
                if matches!(c.value, ConstValue::Str(_) | ConstValue::Int(_)));
            if single {
                None
            } else {
                frame_root(&s.value, state)
            }
        }
        _ => None,
    }
}

fn first_frame_among<'e>(exprs: impl IntoIterator<Item = &'e Expr>, state: &FrameState) -> Option<String> {
    exprs.into_iter().find_map(|e| {
        if let Some(root) = frame_root(e, state) {
            return Some(root.to_string());
        }
        match e {
            Expr::Other(o) => first_frame_among(&o.children, state),
            _ => None,
        }
    })
}

fn frame_origin(value: &Expr, table: &ImportTable, state: &FrameState) -> Option<Origin> {
    if let Expr::Call(call) = value {
        if let Some(path) = ops::canonical_callee(call, table) {
            if READER_PATHS.contains(&path.as_str()) {
                let source_dataset = call
                    .args
                    .first()
                    .and_then(|a| match a {
                        Expr::Constant(c) => c.as_str().map(str::to_string),
                        _ => None,
                    });
                return Some(Origin {
                    source_dataset,
                    derived_from: None,
                });
            }
            if FRAME_COMBINATORS.contains(&path.as_str()) {
                let parent = first_frame_among(&call.args, state)?;
                return Some(derived(parent, state));
            }
        }
    }
    frame_root(value, state).map(|root| derived(root.to_string(), state))
}

fn derived(parent: String, state: &FrameState) -> Origin {
    Origin {
        source_dataset: state.get(&parent).and_then(|p| p.source_dataset.clone()),
        derived_from: Some(parent),
    }
}

fn inplace_call(call: &CallExpr) -> bool {
    matches!(
        call.keyword("inplace"),
        Some(Expr::Constant(c)) if c.value == ConstValue::Bool(true)
    )
}

/// Frames mutated in place by calls carrying `inplace=True`.
fn inplace_targets(stmt: &Stmt, state: &FrameState) -> Vec<String> {
    struct Inplace<'s> {
        state: &'s FrameState,
        found: Vec<String>,
    }
    impl Visitor for Inplace<'_> {
        fn visit_call(&mut self, node: &CallExpr) {
            if !inplace_call(node) {
                return;
            }
            if let Some(root) = node.receiver().and_then(Expr::root_name) {
                if self.state.contains(root) {
                    self.found.push(root.to_string());
                }
            }
        }
    }
    let mut v = Inplace {
        state,
        found: Vec::new(),
    };
    syntax::walk_stmt(stmt, &mut v);
    v.found
}

fn passes_name_to_call(value: &Expr, name: &str) -> bool {
    let Expr::Call(call) = value else {
        return false;
    };
    call.args
        .iter()
        .chain(call.keywords.iter().map(|k| &k.value))
        .any(|a| a.as_name() == Some(name))
}

/// Registers frames created or derived by `stmt` and bumps the modification
/// cell of frames it writes.
pub fn seed_frames(stmt: &Stmt, table: &ImportTable, state: &mut FrameState, cell: usize) {
    let before = state.clone();
    match stmt {
        Stmt::Assign(assign) => {
            let origin = frame_origin(&assign.value, table, &before);
            for target in &assign.targets {
                match target {
                    Expr::Name(n) => match &origin {
                        Some(o) if o.derived_from.as_deref() == Some(n.id.as_str()) => {
                            state.touch(&n.id, cell);
                        }
                        Some(o) => state.insert(
                            n.id.clone(),
                            FrameInfo {
                                creation_cell: cell,
                                source_dataset: o.source_dataset.clone(),
                                last_modified_cell: cell,
                                derived_from: o.derived_from.clone(),
                            },
                        ),
                        // `df = prep(df)`: an opaque call fed the frame and
                        // rebinding the same name is assumed to return it.
                        None if passes_name_to_call(&assign.value, &n.id) => {
                            state.touch(&n.id, cell);
                        }
                        None => {
                            state.remove(&n.id);
                        }
                    },
                    Expr::Subscript(_) | Expr::Attribute(_) => {
                        if let Some(root) = target.root_name() {
                            state.touch(root, cell);
                        }
                    }
                    _ => {}
                }
            }
        }
        Stmt::AugAssign(aug) => {
            if let Some(root) = aug.target.root_name() {
                state.touch(root, cell);
            }
        }
        Stmt::Other(o) if o.kind_name == "Delete" => {
            for child in &o.children {
                if let syntax::Child::Expr(e) = child {
                    if let (Expr::Subscript(_) | Expr::Attribute(_), Some(root)) = (e, e.root_name()) {
                        state.touch(root, cell);
                    }
                }
            }
        }
        _ => {}
    }
    for name in inplace_targets(stmt, &before) {
        state.touch(&name, cell);
    }
}

// ---------------------------------------------------------------------------
// Reads and writes

/// Frame names read and written by one statement, each in order of first
/// appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameRefs {
    pub reads: Vec<String>,
    pub writes: Vec<String>,
}

impl FrameRefs {
    pub fn read_set(&self) -> BTreeSet<&str> {
        self.reads.iter().map(String::as_str).collect()
    }

    pub fn write_set(&self) -> BTreeSet<&str> {
        self.writes.iter().map(String::as_str).collect()
    }

    fn push_read(&mut self, name: &str) {
        if !self.reads.iter().any(|r| r == name) {
            self.reads.push(name.to_string());
        }
    }

    fn push_write(&mut self, name: &str) {
        if !self.writes.iter().any(|w| w == name) {
            self.writes.push(name.to_string());
        }
    }
}

fn frame_names_in(expr: &Expr, state: &FrameState, out: &mut FrameRefs) {
    struct Reads<'a> {
        state: &'a FrameState,
        out: &'a mut FrameRefs,
    }
    impl Visitor for Reads<'_> {
        fn visit_name(&mut self, node: &syntax::NameExpr) {
            if self.state.contains(&node.id) {
                self.out.push_read(&node.id);
            }
        }
    }
    syntax::walk_expr(expr, &mut Reads { state, out });
}

/// Reads inside an assignment target: subscript indices and attribute bases
/// below the written root.
fn target_reads(target: &Expr, state: &FrameState, out: &mut FrameRefs) {
    match target {
        Expr::Subscript(s) => {
            target_reads(&s.value, state, out);
            frame_names_in(&s.index, state, out);
        }
        Expr::Attribute(a) => target_reads(&a.value, state, out),
        Expr::Other(o) => o.children.iter().for_each(|c| target_reads(c, state, out)),
        _ => {}
    }
}

fn target_writes(target: &Expr, state: &FrameState, out: &mut FrameRefs) {
    match target {
        Expr::Name(n) if state.contains(&n.id) => out.push_write(&n.id),
        Expr::Subscript(_) | Expr::Attribute(_) => {
            if let Some(root) = target.root_name().filter(|r| state.contains(r)) {
                out.push_write(root);
            }
        }
        Expr::Other(o) => o.children.iter().for_each(|c| target_writes(c, state, out)),
        _ => {}
    }
}

/// Known frames read (value position) and written (assignment target,
/// subscript assignment, augmented assignment, `del`, or `inplace=True`).
pub fn detect_frame_refs(stmt: &Stmt, state: &FrameState) -> FrameRefs {
    let mut refs = FrameRefs::default();
    match stmt {
        Stmt::Assign(a) => {
            for t in &a.targets {
                target_reads(t, state, &mut refs);
            }
            frame_names_in(&a.value, state, &mut refs);
            for t in &a.targets {
                target_writes(t, state, &mut refs);
            }
        }
        Stmt::AugAssign(a) => {
            frame_names_in(&a.target, state, &mut refs);
            frame_names_in(&a.value, state, &mut refs);
            target_writes(&a.target, state, &mut refs);
        }
        Stmt::Expr(e) => frame_names_in(&e.value, state, &mut refs),
        Stmt::Other(o) if o.kind_name == "Delete" => {
            for child in &o.children {
                if let syntax::Child::Expr(e) = child {
                    target_reads(e, state, &mut refs);
                    if !matches!(e, Expr::Name(_)) {
                        target_writes(e, state, &mut refs);
                    }
                }
            }
        }
        Stmt::Other(o) => {
            for child in &o.children {
                if let syntax::Child::Expr(e) = child {
                    frame_names_in(e, state, &mut refs);
                }
            }
        }
        Stmt::Import(_) | Stmt::ImportFrom(_) | Stmt::FunctionDef(_) | Stmt::For(_) => {}
    }
    for name in inplace_targets(stmt, state) {
        refs.push_write(&name);
    }
    refs
}

// ---------------------------------------------------------------------------
// Records

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatementAnalysis {
    /// Records with the ordinal (within the analyzed statement, nested
    /// statements counted in pre-order) of the statement that produced them.
    pub records: Vec<(usize, SnippetRecord)>,
    pub notes: Vec<Note>,
    /// Simple statements examined, nested ones included.
    pub statements_visited: usize,
}

/// Everything notebook-wide that statement analysis consults.
#[derive(Debug, Clone, Copy)]
pub struct AnalysisContext<'a> {
    pub table: &'a ImportTable,
    pub roles: &'a RoleIndex,
}

/// Analyzes one statement, updating `state`. Compound statements are
/// descended into: loop bodies are analyzed once each (with a note on every
/// record they produce), branch/try/with bodies in document order. Function
/// and class bodies are not analyzed.
pub fn analyze_statement(
    stmt: &Stmt,
    state: &mut FrameState,
    ctx: AnalysisContext<'_>,
    cell: usize,
) -> StatementAnalysis {
    let mut out = StatementAnalysis::default();
    analyze_into(stmt, state, ctx, cell, None, &mut out);
    out
}

fn analyze_into(
    stmt: &Stmt,
    state: &mut FrameState,
    ctx: AnalysisContext<'_>,
    cell: usize,
    enclosing_loop: Option<&str>,
    out: &mut StatementAnalysis,
) {
    match stmt {
        Stmt::For(f) => {
            let header = format!("`for` loop at line {}", f.span.start_line);
            for body in f.body.iter().chain(&f.orelse) {
                analyze_into(body, state, ctx, cell, Some(&header), out);
            }
        }
        Stmt::Other(o) if o.kind_name == "While" => {
            let header = format!("`while` loop at line {}", o.span.start_line);
            for body in o.nested_statements() {
                analyze_into(body, state, ctx, cell, Some(&header), out);
            }
        }
        Stmt::Other(o)
            if matches!(
                o.kind_name.as_str(),
                "If" | "Try" | "TryStar" | "With" | "AsyncWith" | "Match"
            ) =>
        {
            for body in o.nested_statements() {
                analyze_into(body, state, ctx, cell, enclosing_loop, out);
            }
        }
        Stmt::FunctionDef(_) | Stmt::Import(_) | Stmt::ImportFrom(_) => {}
        Stmt::Other(o) if matches!(o.kind_name.as_str(), "ClassDef" | "AsyncFor") => {}
        simple => {
            let ordinal = out.statements_visited;
            out.statements_visited += 1;
            if let Some(record) = analyze_simple(simple, state, ctx, cell, &mut out.notes) {
                if let Some(header) = enclosing_loop {
                    out.notes.push(Note::new(
                        cell,
                        Category::LoopBody,
                        format!(
                            "`{}` sits inside the {header}; analyzed once, iterations not unrolled",
                            record.code
                        ),
                    ));
                }
                out.records.push((ordinal, record));
            }
        }
    }
}

fn analyze_simple(
    stmt: &Stmt,
    state: &mut FrameState,
    ctx: AnalysisContext<'_>,
    cell: usize,
    notes: &mut Vec<Note>,
) -> Option<SnippetRecord> {
    for name in implicit_frames(stmt, state, ctx) {
        state.insert(name, FrameInfo::created(cell, None));
    }
    let before = state.clone();
    seed_frames(stmt, ctx.table, state, cell);
    let mut refs = detect_frame_refs(stmt, &before);
    for created in newly_registered(stmt, &before, state, cell) {
        refs.push_write(&created);
    }
    if refs.reads.is_empty() && refs.writes.is_empty() {
        return None;
    }

    let operation_type = ops::classify(stmt, &before, ctx.table);
    let call = ops::primary_call(stmt);
    let subject = call
        .and_then(|c| subject_frame(c, &before, ctx.table))
        .filter(|s| refs.reads.contains(s))
        .or_else(|| refs.reads.first().cloned());

    let (new_df, prev_df) = match refs.writes.first() {
        Some(written) => (Some(written.clone()), subject.clone()),
        None => (None, None),
    };

    for inner in ops::inner_chain_labels(stmt, &before, ctx.table) {
        notes.push(Note::new(
            cell,
            Category::ChainedCall,
            format!(
                "inner `{inner}` call in chain; statement classified as `{operation_type}`"
            ),
        ));
    }
    if operation_type.takes_transform() {
        if let Err(err) = ops::extract_transform_arg(stmt, ctx.roles) {
            notes.push(Note::new(cell, Category::MissingArgument, err.to_string()));
        }
    }

    let mut primary: BTreeSet<&str> = BTreeSet::new();
    primary.extend(new_df.as_deref());
    primary.extend(subject.as_deref());
    let required_variables = required_variables(stmt, &primary, &before, state, ctx);

    Some(SnippetRecord {
        operation_type,
        new_df,
        prev_df,
        code: syntax::render_stmt(stmt),
        required_variables,
        imports: imports::imports_referenced_by(stmt, ctx.table),
        snippet_cell_number: cell,
    })
}

/// Names never bound or imported anywhere in the notebook that receive a
/// DataFrame method call (`df.head(3)` in a notebook whose loading code is
/// not part of the document). They are taken as frames defined elsewhere.
fn implicit_frames(stmt: &Stmt, state: &FrameState, ctx: AnalysisContext<'_>) -> Vec<String> {
    struct Receivers(Vec<String>);
    impl Visitor for Receivers {
        fn visit_call(&mut self, node: &CallExpr) {
            if let (Some(method), Some(Expr::Name(n))) = (node.method_name(), node.receiver()) {
                if FRAME_METHODS.contains(&method) && !self.0.contains(&n.id) {
                    self.0.push(n.id.clone());
                }
            }
        }
    }
    let mut receivers = Receivers(Vec::new());
    syntax::walk_stmt(stmt, &mut receivers);
    let bound = locally_bound(stmt);
    receivers
        .0
        .into_iter()
        .filter(|name| {
            !state.contains(name)
                && !bound.contains(name)
                && ctx.table.get(name).is_none()
                && ctx.roles.report(name).role == crate::roles::TermRole::NotFound
        })
        .collect()
}

/// Names given a fresh frame registration by this statement.
fn newly_registered(stmt: &Stmt, before: &FrameState, after: &FrameState, cell: usize) -> Vec<String> {
    let Stmt::Assign(a) = stmt else {
        return Vec::new();
    };
    a.targets
        .iter()
        .filter_map(Expr::as_name)
        .filter(|name| match (before.get(name), after.get(name)) {
            (_, None) => false,
            (None, Some(_)) => true,
            (Some(old), Some(new)) => old != new && new.creation_cell == cell,
        })
        .map(str::to_string)
        .collect()
}

/// The frame a call operates on: its receiver, or for module-level pandas
/// functions the first frame argument.
fn subject_frame(call: &CallExpr, state: &FrameState, table: &ImportTable) -> Option<String> {
    if let Some(root) = call.receiver().and_then(Expr::root_name) {
        if state.contains(root) {
            return Some(root.to_string());
        }
    }
    if ops::canonical_callee(call, table).is_some() {
        return call.args.iter().find_map(|a| match a.root_name() {
            Some(r) if state.contains(r) => Some(r.to_string()),
            _ => None,
        });
    }
    None
}

/// Names that are bound inside the statement itself (lambda parameters,
/// comprehension variables) and plain assignment targets.
fn locally_bound(stmt: &Stmt) -> BTreeSet<String> {
    struct Bound(BTreeSet<String>);
    impl Visitor for Bound {
        fn visit_lambda(&mut self, node: &LambdaExpr) {
            self.0.extend(node.param_names().map(str::to_string));
        }
        fn visit_other_expr(&mut self, node: &OtherExpr) {
            self.0.extend(node.binds.iter().cloned());
        }
    }
    let mut bound = Bound(BTreeSet::new());
    syntax::walk_stmt(stmt, &mut bound);
    if let Stmt::Assign(a) = stmt {
        bound
            .0
            .extend(a.targets.iter().filter_map(Expr::as_name).map(str::to_string));
    }
    bound.0
}

fn required_variables(
    stmt: &Stmt,
    primary: &BTreeSet<&str>,
    before: &FrameState,
    after: &FrameState,
    ctx: AnalysisContext<'_>,
) -> BTreeMap<String, VariableDescriptor> {
    let bound = locally_bound(stmt);
    let mut out = BTreeMap::new();
    for name in syntax::names_in_stmt(stmt) {
        if out.contains_key(&name) || primary.contains(name.as_str()) || bound.contains(&name) {
            continue;
        }
        if ctx.table.get(&name).is_some() {
            continue;
        }
        let is_frame = before.contains(&name) || after.contains(&name);
        let report = ctx.roles.report(&name);
        if is_frame {
            out.insert(
                name,
                VariableDescriptor {
                    role: ValueKind::VariableOther,
                    source: report.rendered_source,
                },
            );
        } else if report.rendered_source.is_some() {
            out.insert(
                name.clone(),
                VariableDescriptor {
                    role: ctx.roles.classify(&Expr::Name(syntax::NameExpr {
                        id: name,
                        span: Default::default(),
                    })),
                    source: report.rendered_source,
                },
            );
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Whole notebooks

/// Parses every code cell after sanitizing it. Returns the parsed cells
/// with their indices, plus diagnostics for dropped lines and syntax errors.
pub fn parse_code_cells(nb: &NotebookDocument) -> (Vec<(usize, SyntaxTree)>, Vec<Diagnostic>) {
    let notebook_ref = nb.notebook_ref.as_str();
    let mut diagnostics = Vec::new();
    let mut parsed = Vec::new();
    for cell in ingest::extract_code_cells(nb) {
        let sanitized = ingest::sanitize_cell(&cell);
        for dropped in &sanitized.dropped {
            diagnostics.push(Diagnostic::new(
                notebook_ref,
                Some(cell.index),
                Category::DroppedLine,
                format!("line {}: `{}`", dropped.line, dropped.text.trim()),
            ));
        }
        match syntax::parse_module(&sanitized.text) {
            Ok(tree) => parsed.push((cell.index, tree)),
            Err(err) => diagnostics.push(Diagnostic::new(
                notebook_ref,
                Some(cell.index),
                Category::SyntaxError,
                err.to_string(),
            )),
        }
    }
    (parsed, diagnostics)
}

/// All parseable code cells of a notebook as one tree, in document order.
pub fn notebook_tree(parsed: &[(usize, SyntaxTree)]) -> SyntaxTree {
    SyntaxTree {
        statements: parsed
            .iter()
            .flat_map(|(_, t)| t.statements.iter().cloned())
            .collect(),
    }
}

/// Converts a parsed notebook into its trace. Cells that fail to parse are
/// skipped with a diagnostic; nothing aborts the notebook.
pub fn convert_notebook(nb: &NotebookDocument) -> NotebookTrace {
    let notebook_ref = nb.notebook_ref.as_str();
    let (parsed, mut diagnostics) = parse_code_cells(nb);
    let roles = RoleIndex::build(&notebook_tree(&parsed));
    let mut table = ImportTable::new();
    let mut state = FrameState::default();
    let mut entries = Vec::new();

    for (cell, tree) in &parsed {
        let mut base = 0;
        for stmt in &tree.statements {
            let notes = imports::collect_statement_imports(stmt, *cell, &mut table);
            diagnostics.extend(notes.into_iter().map(|n| n.into_diagnostic(notebook_ref)));
            let ctx = AnalysisContext {
                table: &table,
                roles: &roles,
            };
            let analysis = analyze_statement(stmt, &mut state, ctx, *cell);
            entries.extend(analysis.records.into_iter().map(|(ordinal, record)| TraceEntry {
                cell: *cell,
                statement_index: base + ordinal,
                record,
            }));
            diagnostics.extend(
                analysis
                    .notes
                    .into_iter()
                    .map(|n| n.into_diagnostic(notebook_ref)),
            );
            base += analysis.statements_visited.max(1);
        }
    }

    NotebookTrace {
        notebook_ref: notebook_ref.to_string(),
        entries,
        diagnostics,
    }
}

/// Parses raw `.ipynb` text and converts it.
pub fn convert_raw(raw: &str, notebook_ref: &str) -> Result<NotebookTrace, IngestError> {
    ingest::parse_notebook(raw, notebook_ref).map(|nb| convert_notebook(&nb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Cell, CellKind};
    use crate::syntax::parse_module;

    fn stmt(src: &str) -> Stmt {
        parse_module(src).unwrap().statements.remove(0)
    }

    fn pandas_table() -> ImportTable {
        let mut table = ImportTable::new();
        imports::collect_imports(&parse_module("import pandas as pd").unwrap(), 0, &mut table);
        table
    }

    fn with_df() -> FrameState {
        let mut state = FrameState::default();
        state.insert("df", FrameInfo::created(0, Some("train.csv".into())));
        state
    }

    fn notebook(cells: &[&str]) -> NotebookDocument {
        NotebookDocument {
            notebook_ref: "nb".into(),
            kernel_language: "python".into(),
            cells: cells
                .iter()
                .enumerate()
                .map(|(index, src)| Cell {
                    index,
                    kind: CellKind::Code,
                    source: src.to_string(),
                })
                .collect(),
        }
    }

    #[test]
    fn reader_call_seeds_frame() {
        let mut state = FrameState::default();
        seed_frames(&stmt("df = pd.read_csv('train.csv')"), &pandas_table(), &mut state, 2);
        let info = state.get("df").unwrap();
        assert_eq!(info.source_dataset.as_deref(), Some("train.csv"));
        assert_eq!(info.creation_cell, 2);
        assert_eq!(info.derived_from, None);
    }

    #[test]
    fn plain_assignment_does_not_seed() {
        let mut state = FrameState::default();
        seed_frames(&stmt("x = 1"), &pandas_table(), &mut state, 0);
        assert!(state.is_empty());
    }

    #[test]
    fn copy_derives_frame() {
        let mut state = with_df();
        seed_frames(&stmt("df2 = df.copy()"), &pandas_table(), &mut state, 4);
        let info = state.get("df2").unwrap();
        assert_eq!(info.derived_from.as_deref(), Some("df"));
        assert_eq!(info.source_dataset.as_deref(), Some("train.csv"));
    }

    #[test]
    fn column_selection_and_scalars_are_not_frames() {
        let mut state = with_df();
        let table = pandas_table();
        for src in ["ages = df['age']", "n = df.shape[0]", "d = df.to_dict()", "v = df.values"] {
            seed_frames(&stmt(src), &table, &mut state, 1);
        }
        assert_eq!(state.len(), 1);
    }

    #[test]
    fn self_reassignment_keeps_creation_cell() {
        let mut state = with_df();
        seed_frames(&stmt("df = df.dropna()"), &pandas_table(), &mut state, 5);
        let info = state.get("df").unwrap();
        assert_eq!(info.creation_cell, 0);
        assert_eq!(info.last_modified_cell, 5);
    }

    #[test]
    fn rebinding_to_non_frame_forgets_it() {
        let mut state = with_df();
        seed_frames(&stmt("df = 3"), &pandas_table(), &mut state, 1);
        assert!(!state.contains("df"));
    }

    #[test]
    fn opaque_call_on_same_name_keeps_frame() {
        let mut state = with_df();
        seed_frames(&stmt("df = prep(df)"), &pandas_table(), &mut state, 3);
        assert_eq!(state.get("df").unwrap().last_modified_cell, 3);
        seed_frames(&stmt("n = len(df)"), &pandas_table(), &mut state, 4);
        assert!(!state.contains("n"));
    }

    #[test]
    fn concat_derives_from_first_frame() {
        let mut state = with_df();
        state.insert("other", FrameInfo::created(0, None));
        seed_frames(&stmt("full = pd.concat([df, other])"), &pandas_table(), &mut state, 3);
        assert_eq!(state.get("full").unwrap().derived_from.as_deref(), Some("df"));
    }

    fn refs(src: &str) -> (BTreeSet<String>, BTreeSet<String>) {
        let r = detect_frame_refs(&stmt(src), &with_df());
        (
            r.reads.into_iter().collect(),
            r.writes.into_iter().collect(),
        )
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn column_assignment_reads_and_writes() {
        assert_eq!(
            refs("df['age'] = df['age'].fillna(0)"),
            (set(&["df"]), set(&["df"]))
        );
    }

    #[test]
    fn inspection_only_reads() {
        assert_eq!(refs("df.head(3)"), (set(&["df"]), set(&[])));
    }

    #[test]
    fn unrelated_statement_touches_nothing() {
        assert_eq!(refs("print(1)"), (set(&[]), set(&[])));
    }

    #[test]
    fn inplace_is_a_write() {
        assert_eq!(
            refs("df.fillna(0, inplace=True)"),
            (set(&["df"]), set(&["df"]))
        );
        assert_eq!(
            refs("df['a'].fillna(0, inplace=False)"),
            (set(&["df"]), set(&[]))
        );
    }

    #[test]
    fn augmented_and_delete_are_writes() {
        assert_eq!(refs("df['a'] += 1"), (set(&["df"]), set(&["df"])));
        assert_eq!(refs("del df['a']"), (set(&[]), set(&["df"])));
    }

    #[test]
    fn target_index_reads() {
        assert_eq!(
            refs("df.loc[df['a'] > 0, 'b'] = 1"),
            (set(&["df"]), set(&["df"]))
        );
    }

    fn trace(cells: &[&str]) -> NotebookTrace {
        convert_notebook(&notebook(cells))
    }

    #[test]
    fn head_record_matches_schema_example() {
        let t = trace(&["import pandas as pd\ndf = pd.read_csv('train.csv')", "df.head(3)"]);
        let head = &t.entries[1].record;
        assert_eq!(head.operation_type, OperationType::Unlabeled);
        assert_eq!(head.new_df, None);
        assert_eq!(head.prev_df, None);
        assert_eq!(head.code, "df.head(3)");
        assert!(head.required_variables.is_empty());
        assert!(head.imports.is_empty());
        assert_eq!(head.snippet_cell_number, 1);
    }

    #[test]
    fn unbound_receiver_of_frame_method_is_a_frame() {
        let t = trace(&["df.head(3)"]);
        assert_eq!(t.entries.len(), 1);
        assert_eq!(t.entries[0].record.code, "df.head(3)");
    }

    #[test]
    fn bound_non_frame_receiver_is_not_a_frame() {
        assert!(trace(&["items = [3, 1]", "items.sort()", "s = 'a'", "s.head()"]).entries.is_empty());
    }

    #[test]
    fn no_record_for_plain_assignment() {
        assert!(trace(&["x = 1"]).entries.is_empty());
    }

    #[test]
    fn map_with_mapping_variable() {
        let t = trace(&[
            "import pandas as pd\ndf = pd.read_csv('train.csv')\nmapping = {'male': 0, 'female': 1}",
            "df['sex'] = df['sex'].map(mapping)",
        ]);
        let rec = &t.entries.last().unwrap().record;
        assert_eq!(rec.operation_type, OperationType::Map);
        assert_eq!(rec.new_df.as_deref(), Some("df"));
        assert_eq!(rec.prev_df.as_deref(), Some("df"));
        assert_eq!(rec.required_variables.len(), 1);
        let var = &rec.required_variables["mapping"];
        assert_eq!(var.role, ValueKind::DictionaryLiteral);
        assert_eq!(var.source.as_deref(), Some("{'male': 0, 'female': 1}"));
    }

    #[test]
    fn read_record_has_imports_and_new_frame() {
        let t = trace(&["import pandas as pd\ndf = pd.read_csv('train.csv')"]);
        let rec = &t.entries[0].record;
        assert_eq!(rec.operation_type, OperationType::Read);
        assert_eq!(rec.new_df.as_deref(), Some("df"));
        assert_eq!(rec.prev_df, None);
        assert_eq!(rec.imports.get("pd").map(String::as_str), Some("pandas"));
    }

    #[test]
    fn merge_lists_second_frame_as_variable() {
        let t = trace(&[
            "import pandas as pd\ntrain = pd.read_csv('train.csv')\nextra = pd.read_csv('extra.csv')",
            "full = train.merge(extra, on='id')",
        ]);
        let rec = &t.entries.last().unwrap().record;
        assert_eq!(rec.operation_type, OperationType::Merge);
        assert_eq!(rec.prev_df.as_deref(), Some("train"));
        assert_eq!(rec.new_df.as_deref(), Some("full"));
        let other = &rec.required_variables["extra"];
        assert_eq!(other.role, ValueKind::VariableOther);
        assert_eq!(other.source.as_deref(), Some("pd.read_csv('extra.csv')"));
    }

    #[test]
    fn lambda_parameters_are_not_required_variables() {
        let t = trace(&[
            "import pandas as pd\ndf = pd.read_csv('a.csv')\nx = 10",
            "df['v'] = df['v'].apply(lambda x: x * 2)",
        ]);
        assert!(t.entries.last().unwrap().record.required_variables.is_empty());
    }

    #[test]
    fn loop_body_records_carry_notes() {
        let t = trace(&[
            "import pandas as pd\ndf = pd.read_csv('a.csv')",
            "for c in ['a', 'b']:\n    df[c] = df[c].fillna(0)\n    print(c)",
        ]);
        let loop_records: Vec<_> = t.entries.iter().filter(|e| e.cell == 1).collect();
        assert_eq!(loop_records.len(), 1);
        assert_eq!(loop_records[0].record.code, "df[c] = df[c].fillna(0)");
        assert_eq!(loop_records[0].record.operation_type, OperationType::Fillna);
        let loop_notes = t
            .diagnostics
            .iter()
            .filter(|d| d.category == Category::LoopBody)
            .count();
        assert_eq!(loop_notes, 1);
    }

    #[test]
    fn syntax_error_skips_only_that_cell() {
        let t = trace(&[
            "import pandas as pd\ndf = pd.read_csv('a.csv')",
            "def broken(:",
            "df.info()",
        ]);
        assert_eq!(t.entries.len(), 2);
        assert!(t
            .diagnostics
            .iter()
            .any(|d| d.category == Category::SyntaxError && d.cell == Some(1)));
    }

    #[test]
    fn chained_call_is_noted() {
        let t = trace(&[
            "import pandas as pd\ndf = pd.read_csv('a.csv')\ndf['a'] = df['a'].fillna(0).astype(int)",
        ]);
        assert_eq!(t.entries[1].record.operation_type, OperationType::AsType);
        assert!(t.diagnostics.iter().any(|d| d.category == Category::ChainedCall));
    }

    #[test]
    fn missing_transform_argument_is_noted() {
        let t = trace(&["import pandas as pd\ndf = pd.read_csv('a.csv')\ndf = df.apply()"]);
        assert_eq!(t.entries[1].record.operation_type, OperationType::Apply);
        assert!(t
            .diagnostics
            .iter()
            .any(|d| d.category == Category::MissingArgument));
    }

    #[test]
    fn record_serializes_in_schema_order() {
        let t = trace(&["import pandas as pd\ndf = pd.read_csv('a.csv')", "df.head(3)"]);
        let json = serde_json::to_string(&t.entries[1].record).unwrap();
        assert_eq!(
            json,
            r#"{"operation_type":"","new_df":null,"prev_df":null,"code":"df.head(3)","required_variables":{},"imports":{},"snippet_cell_number":1}"#
        );
    }
}
