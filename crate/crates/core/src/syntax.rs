//! Python syntax trees reduced to the node kinds the trace analyses care about.
//!
//! Parsing is delegated to `rustpython-parser`; its full AST is folded into a
//! small closed set of statement and expression kinds. Anything outside that
//! set becomes an `Other` node which keeps its rendered text and its direct
//! children, so names nested inside unsupported constructs stay visible to
//! [`walk`].

use rustpython_ast as ast;
use rustpython_ast::Visitor as _;
use rustpython_parser::text_size::{TextRange, TextSize};
use rustpython_parser::Parse;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Line/column range of a node. Lines are 1-based, columns are 0-based byte
/// offsets within the line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at line {line}: {message}")]
pub struct SyntaxError {
    pub line: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SyntaxTree {
    pub statements: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Import(ImportStmt),
    ImportFrom(ImportFromStmt),
    Assign(AssignStmt),
    AugAssign(AugAssignStmt),
    Expr(ExprStmt),
    FunctionDef(FunctionDefStmt),
    For(ForStmt),
    Other(OtherStmt),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportAlias {
    pub name: String,
    pub asname: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportStmt {
    pub names: Vec<ImportAlias>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportFromStmt {
    pub module: Option<String>,
    /// Number of leading dots in a relative import.
    pub level: u32,
    pub names: Vec<ImportAlias>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignStmt {
    pub targets: Vec<Expr>,
    pub value: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugAssignStmt {
    pub target: Expr,
    /// Binary operator without the trailing `=`, e.g. `+`.
    pub op: String,
    pub value: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExprStmt {
    pub value: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDefStmt {
    pub name: String,
    pub is_async: bool,
    /// Decorators, parameter defaults/annotations and return annotation, in
    /// source order.
    pub header: Vec<Expr>,
    pub body: Vec<Stmt>,
    /// Original source of the whole definition, dedented to column zero.
    pub source: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForStmt {
    pub is_async: bool,
    pub target: Expr,
    pub iter: Expr,
    pub body: Vec<Stmt>,
    pub orelse: Vec<Stmt>,
    pub source: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtherStmt {
    /// Python AST class name, e.g. `If`, `Try`, `ClassDef`.
    pub kind_name: String,
    pub children: Vec<Child>,
    pub source: String,
    pub span: Span,
}

impl OtherStmt {
    /// Statements directly nested in this compound statement, in source order.
    pub fn nested_statements(&self) -> impl Iterator<Item = &Stmt> {
        self.children.iter().filter_map(|c| match c {
            Child::Stmt(s) => Some(s),
            Child::Expr(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Child {
    Stmt(Stmt),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Call(CallExpr),
    Attribute(AttributeExpr),
    Name(NameExpr),
    Subscript(SubscriptExpr),
    Lambda(LambdaExpr),
    MappingLiteral(MappingLiteralExpr),
    Constant(ConstantExpr),
    Other(OtherExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keyword {
    /// `None` for `**kwargs` unpacking.
    pub name: Option<String>,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallExpr {
    pub func: Box<Expr>,
    pub args: Vec<Expr>,
    pub keywords: Vec<Keyword>,
    pub span: Span,
}

impl CallExpr {
    pub fn keyword(&self, name: &str) -> Option<&Expr> {
        self.keywords
            .iter()
            .find(|k| k.name.as_deref() == Some(name))
            .map(|k| &k.value)
    }

    /// Method name when the callee is an attribute access.
    pub fn method_name(&self) -> Option<&str> {
        match self.func.as_ref() {
            Expr::Attribute(a) => Some(a.attr.as_str()),
            _ => None,
        }
    }

    pub fn receiver(&self) -> Option<&Expr> {
        match self.func.as_ref() {
            Expr::Attribute(a) => Some(&a.value),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeExpr {
    pub value: Box<Expr>,
    pub attr: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NameExpr {
    pub id: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubscriptExpr {
    pub value: Box<Expr>,
    pub index: Box<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    PositionalOnly,
    Positional,
    VarPositional,
    KeywordOnly,
    VarKeyword,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub kind: ParamKind,
    pub name: String,
    pub default: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaExpr {
    pub params: Vec<Param>,
    pub body: Box<Expr>,
    pub span: Span,
}

impl LambdaExpr {
    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingEntry {
    /// `None` for `**other` unpacking.
    pub key: Option<Expr>,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingLiteralExpr {
    pub entries: Vec<MappingEntry>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstValue {
    None,
    Bool(bool),
    Str(String),
    Bytes(Vec<u8>),
    /// Decimal digits; arbitrary precision is kept as text.
    Int(String),
    Float(f64),
    Complex { real: f64, imag: f64 },
    Ellipsis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantExpr {
    pub value: ConstValue,
    /// Canonical Python spelling of the literal.
    pub text: String,
    pub span: Span,
}

impl ConstantExpr {
    pub fn as_str(&self) -> Option<&str> {
        match &self.value {
            ConstValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtherExpr {
    pub kind_name: String,
    pub text: String,
    pub children: Vec<Expr>,
    /// Names bound locally by the construct (comprehension targets).
    pub binds: Vec<String>,
    pub span: Span,
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::Import(s) => s.span,
            Stmt::ImportFrom(s) => s.span,
            Stmt::Assign(s) => s.span,
            Stmt::AugAssign(s) => s.span,
            Stmt::Expr(s) => s.span,
            Stmt::FunctionDef(s) => s.span,
            Stmt::For(s) => s.span,
            Stmt::Other(s) => s.span,
        }
    }

    pub fn kind_name(&self) -> &str {
        match self {
            Stmt::Import(_) => "Import",
            Stmt::ImportFrom(_) => "ImportFrom",
            Stmt::Assign(_) => "Assign",
            Stmt::AugAssign(_) => "AugAssign",
            Stmt::Expr(_) => "Expr",
            Stmt::FunctionDef(_) => "FunctionDef",
            Stmt::For(_) => "For",
            Stmt::Other(s) => &s.kind_name,
        }
    }
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Call(e) => e.span,
            Expr::Attribute(e) => e.span,
            Expr::Name(e) => e.span,
            Expr::Subscript(e) => e.span,
            Expr::Lambda(e) => e.span,
            Expr::MappingLiteral(e) => e.span,
            Expr::Constant(e) => e.span,
            Expr::Other(e) => e.span,
        }
    }

    pub fn as_name(&self) -> Option<&str> {
        match self {
            Expr::Name(n) => Some(&n.id),
            _ => None,
        }
    }

    /// Dotted path for pure `a.b.c` chains of names and attributes.
    pub fn dotted_path(&self) -> Option<String> {
        match self {
            Expr::Name(n) => Some(n.id.clone()),
            Expr::Attribute(a) => a.value.dotted_path().map(|p| format!("{p}.{}", a.attr)),
            _ => None,
        }
    }

    /// The name at the bottom of an attribute/subscript/call chain:
    /// `df` for `df['a'].fillna(0).astype(int)`.
    pub fn root_name(&self) -> Option<&str> {
        match self {
            Expr::Name(n) => Some(&n.id),
            Expr::Attribute(a) => a.value.root_name(),
            Expr::Subscript(s) => s.value.root_name(),
            Expr::Call(c) => c.func.root_name(),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

/// Parses a whole cell of sanitized Python 3 source.
pub fn parse_module(source: &str) -> Result<SyntaxTree, SyntaxError> {
    let suite = ast::Suite::parse(source, "<cell>").map_err(|err| {
        let lines = LineIndex::new(source);
        let (line, _) = lines.locate(err.offset);
        SyntaxError {
            line,
            message: err.error.to_string(),
        }
    })?;
    let conv = Converter {
        source,
        lines: LineIndex::new(source),
    };
    Ok(SyntaxTree {
        statements: suite.iter().map(|s| conv.stmt(s)).collect(),
    })
}

struct LineIndex {
    starts: Vec<usize>,
}

impl LineIndex {
    fn new(source: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(source.match_indices('\n').map(|(i, _)| i + 1));
        Self { starts }
    }

    fn locate(&self, offset: TextSize) -> (u32, u32) {
        let offset = usize::from(offset);
        let line = self.starts.partition_point(|&s| s <= offset).max(1);
        let col = offset - self.starts[line - 1];
        (line as u32, col as u32)
    }

    fn line_start(&self, line: u32) -> usize {
        self.starts[(line as usize).saturating_sub(1)]
    }
}

struct Converter<'a> {
    source: &'a str,
    lines: LineIndex,
}

#[derive(Default)]
struct ChildCollector {
    stmts: Vec<ast::Stmt>,
    exprs: Vec<ast::Expr>,
    binds: Vec<String>,
}

impl ast::Visitor for ChildCollector {
    fn visit_stmt(&mut self, node: ast::Stmt) {
        self.stmts.push(node);
    }

    fn visit_expr(&mut self, node: ast::Expr) {
        self.exprs.push(node);
    }

    fn visit_comprehension(&mut self, node: ast::Comprehension) {
        collect_bound_names(&node.target, &mut self.binds);
        self.generic_visit_comprehension(node);
    }
}

fn collect_bound_names(target: &ast::Expr, out: &mut Vec<String>) {
    match target {
        ast::Expr::Name(n) => out.push(n.id.to_string()),
        ast::Expr::Tuple(t) => t.elts.iter().for_each(|e| collect_bound_names(e, out)),
        ast::Expr::List(l) => l.elts.iter().for_each(|e| collect_bound_names(e, out)),
        ast::Expr::Starred(s) => collect_bound_names(&s.value, out),
        _ => {}
    }
}

fn range_start(r: &TextRange) -> TextSize {
    r.start()
}

impl Converter<'_> {
    fn span(&self, range: TextRange) -> Span {
        let (start_line, start_col) = self.lines.locate(range.start());
        let (end_line, end_col) = self.lines.locate(range.end());
        Span {
            start_line,
            start_col,
            end_line,
            end_col,
        }
    }

    /// Source of a statement with its first-line indentation removed from
    /// every line that carries it.
    fn dedented_source(&self, range: TextRange) -> String {
        let span = self.span(range);
        let start = self.lines.line_start(span.start_line);
        let raw = &self.source[start..usize::from(range.end())];
        let indent = span.start_col as usize;
        if indent == 0 {
            return raw.to_string();
        }
        raw.split('\n')
            .map(|line| {
                let ws = line.len() - line.trim_start_matches([' ', '\t']).len();
                if ws >= indent {
                    &line[indent..]
                } else {
                    line
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn stmts(&self, body: &[ast::Stmt]) -> Vec<Stmt> {
        body.iter().map(|s| self.stmt(s)).collect()
    }

    fn stmt(&self, stmt: &ast::Stmt) -> Stmt {
        match stmt {
            ast::Stmt::Import(s) => Stmt::Import(ImportStmt {
                names: s.names.iter().map(alias).collect(),
                span: self.span(s.range),
            }),
            ast::Stmt::ImportFrom(s) => Stmt::ImportFrom(ImportFromStmt {
                module: s.module.as_ref().map(|m| m.to_string()),
                level: s.level.map(|l| l.to_u32()).unwrap_or(0),
                names: s.names.iter().map(alias).collect(),
                span: self.span(s.range),
            }),
            ast::Stmt::Assign(s) => Stmt::Assign(AssignStmt {
                targets: s.targets.iter().map(|t| self.expr(t)).collect(),
                value: self.expr(&s.value),
                span: self.span(s.range),
            }),
            ast::Stmt::AugAssign(s) => Stmt::AugAssign(AugAssignStmt {
                target: self.expr(&s.target),
                op: operator_text(&s.op).to_string(),
                value: self.expr(&s.value),
                span: self.span(s.range),
            }),
            ast::Stmt::Expr(s) => Stmt::Expr(ExprStmt {
                value: self.expr(&s.value),
                span: self.span(s.range),
            }),
            ast::Stmt::FunctionDef(s) => {
                self.function_def(stmt, s.name.as_str(), false, &s.body, s.range)
            }
            ast::Stmt::AsyncFunctionDef(s) => {
                self.function_def(stmt, s.name.as_str(), true, &s.body, s.range)
            }
            ast::Stmt::For(s) => Stmt::For(ForStmt {
                is_async: false,
                target: self.expr(&s.target),
                iter: self.expr(&s.iter),
                body: self.stmts(&s.body),
                orelse: self.stmts(&s.orelse),
                source: self.dedented_source(s.range),
                span: self.span(s.range),
            }),
            ast::Stmt::AsyncFor(s) => Stmt::For(ForStmt {
                is_async: true,
                target: self.expr(&s.target),
                iter: self.expr(&s.iter),
                body: self.stmts(&s.body),
                orelse: self.stmts(&s.orelse),
                source: self.dedented_source(s.range),
                span: self.span(s.range),
            }),
            other => {
                let mut collector = ChildCollector::default();
                collector.generic_visit_stmt(other.clone());
                let mut children: Vec<(TextSize, Child)> = collector
                    .stmts
                    .iter()
                    .map(|s| (stmt_start(s), Child::Stmt(self.stmt(s))))
                    .chain(
                        collector
                            .exprs
                            .iter()
                            .map(|e| (expr_start(e), Child::Expr(self.expr(e)))),
                    )
                    .collect();
                children.sort_by_key(|(pos, _)| *pos);
                let range = stmt_range(other);
                Stmt::Other(OtherStmt {
                    kind_name: stmt_kind_name(other).to_string(),
                    children: children.into_iter().map(|(_, c)| c).collect(),
                    source: self.dedented_source(range),
                    span: self.span(range),
                })
            }
        }
    }

    fn function_def(
        &self,
        stmt: &ast::Stmt,
        name: &str,
        is_async: bool,
        body: &[ast::Stmt],
        range: TextRange,
    ) -> Stmt {
        let mut collector = ChildCollector::default();
        collector.generic_visit_stmt(stmt.clone());
        let mut header: Vec<(TextSize, Expr)> = collector
            .exprs
            .iter()
            .map(|e| (expr_start(e), self.expr(e)))
            .collect();
        header.sort_by_key(|(pos, _)| *pos);
        Stmt::FunctionDef(FunctionDefStmt {
            name: name.to_string(),
            is_async,
            header: header.into_iter().map(|(_, e)| e).collect(),
            body: self.stmts(body),
            source: self.dedented_source(range),
            span: self.span(range),
        })
    }

    fn expr(&self, expr: &ast::Expr) -> Expr {
        match expr {
            ast::Expr::Call(c) => Expr::Call(CallExpr {
                func: Box::new(self.expr(&c.func)),
                args: c.args.iter().map(|a| self.expr(a)).collect(),
                keywords: c
                    .keywords
                    .iter()
                    .map(|k| Keyword {
                        name: k.arg.as_ref().map(|a| a.to_string()),
                        value: self.expr(&k.value),
                    })
                    .collect(),
                span: self.span(c.range),
            }),
            ast::Expr::Attribute(a) => Expr::Attribute(AttributeExpr {
                value: Box::new(self.expr(&a.value)),
                attr: a.attr.to_string(),
                span: self.span(a.range),
            }),
            ast::Expr::Name(n) => Expr::Name(NameExpr {
                id: n.id.to_string(),
                span: self.span(n.range),
            }),
            ast::Expr::Subscript(s) => Expr::Subscript(SubscriptExpr {
                value: Box::new(self.expr(&s.value)),
                index: Box::new(self.subscript_index(&s.slice)),
                span: self.span(s.range),
            }),
            ast::Expr::Lambda(l) => Expr::Lambda(LambdaExpr {
                params: self.params(&l.args),
                body: Box::new(self.expr(&l.body)),
                span: self.span(l.range),
            }),
            ast::Expr::Dict(d) => Expr::MappingLiteral(MappingLiteralExpr {
                entries: d
                    .keys
                    .iter()
                    .zip(&d.values)
                    .map(|(k, v)| MappingEntry {
                        key: k.as_ref().map(|k| self.expr(k)),
                        value: self.expr(v),
                    })
                    .collect(),
                span: self.span(d.range),
            }),
            ast::Expr::Constant(c) if !matches!(c.value, ast::Constant::Tuple(_)) => {
                Expr::Constant(ConstantExpr {
                    value: const_value(&c.value),
                    text: expr.to_string(),
                    span: self.span(c.range),
                })
            }
            other => self.other_expr(other, other.to_string()),
        }
    }

    /// Subscript indices are rendered in subscript context so that bare
    /// tuples and slices (`df.iloc[:, 1:3]`) keep valid syntax.
    fn subscript_index(&self, slice: &ast::Expr) -> Expr {
        match slice {
            ast::Expr::Tuple(_) | ast::Expr::Slice(_) => {
                let probe = ast::Expr::Subscript(ast::ExprSubscript {
                    range: TextRange::default(),
                    value: Box::new(ast::Expr::Name(ast::ExprName {
                        range: TextRange::default(),
                        id: ast::Identifier::new("x"),
                        ctx: ast::ExprContext::Load,
                    })),
                    slice: Box::new(slice.clone()),
                    ctx: ast::ExprContext::Load,
                })
                .to_string();
                let text = probe
                    .strip_prefix("x[")
                    .and_then(|t| t.strip_suffix(']'))
                    .unwrap_or(&probe)
                    .to_string();
                self.other_expr(slice, text)
            }
            _ => self.expr(slice),
        }
    }

    fn other_expr(&self, expr: &ast::Expr, text: String) -> Expr {
        let mut collector = ChildCollector::default();
        collector.generic_visit_expr(expr.clone());
        let mut children: Vec<(TextSize, Expr)> = collector
            .exprs
            .iter()
            .map(|e| (expr_start(e), self.expr(e)))
            .collect();
        children.sort_by_key(|(pos, _)| *pos);
        Expr::Other(OtherExpr {
            kind_name: expr_kind_name(expr).to_string(),
            text,
            children: children.into_iter().map(|(_, e)| e).collect(),
            binds: collector.binds,
            span: self.span(expr_range(expr)),
        })
    }

    fn params(&self, args: &ast::Arguments) -> Vec<Param> {
        let with_default = |kind: ParamKind, a: &ast::ArgWithDefault| Param {
            kind,
            name: a.def.arg.to_string(),
            default: a.default.as_ref().map(|d| self.expr(d)),
        };
        let mut params: Vec<Param> = args
            .posonlyargs
            .iter()
            .map(|a| with_default(ParamKind::PositionalOnly, a))
            .collect();
        params.extend(
            args.args
                .iter()
                .map(|a| with_default(ParamKind::Positional, a)),
        );
        if let Some(v) = &args.vararg {
            params.push(Param {
                kind: ParamKind::VarPositional,
                name: v.arg.to_string(),
                default: None,
            });
        }
        params.extend(
            args.kwonlyargs
                .iter()
                .map(|a| with_default(ParamKind::KeywordOnly, a)),
        );
        if let Some(k) = &args.kwarg {
            params.push(Param {
                kind: ParamKind::VarKeyword,
                name: k.arg.to_string(),
                default: None,
            });
        }
        params
    }
}

fn alias(a: &ast::Alias) -> ImportAlias {
    ImportAlias {
        name: a.name.to_string(),
        asname: a.asname.as_ref().map(|n| n.to_string()),
    }
}

fn const_value(c: &ast::Constant) -> ConstValue {
    match c {
        ast::Constant::None => ConstValue::None,
        ast::Constant::Bool(b) => ConstValue::Bool(*b),
        ast::Constant::Str(s) => ConstValue::Str(s.clone()),
        ast::Constant::Bytes(b) => ConstValue::Bytes(b.clone()),
        ast::Constant::Int(i) => ConstValue::Int(i.to_string()),
        ast::Constant::Float(f) => ConstValue::Float(*f),
        ast::Constant::Complex { real, imag } => ConstValue::Complex {
            real: *real,
            imag: *imag,
        },
        ast::Constant::Ellipsis | ast::Constant::Tuple(_) => ConstValue::Ellipsis,
    }
}

fn operator_text(op: &ast::Operator) -> &'static str {
    match op {
        ast::Operator::Add => "+",
        ast::Operator::Sub => "-",
        ast::Operator::Mult => "*",
        ast::Operator::MatMult => "@",
        ast::Operator::Div => "/",
        ast::Operator::Mod => "%",
        ast::Operator::Pow => "**",
        ast::Operator::LShift => "<<",
        ast::Operator::RShift => ">>",
        ast::Operator::BitOr => "|",
        ast::Operator::BitXor => "^",
        ast::Operator::BitAnd => "&",
        ast::Operator::FloorDiv => "//",
    }
}

fn stmt_range(s: &ast::Stmt) -> TextRange {
    use ast::Ranged;
    s.range()
}

fn stmt_start(s: &ast::Stmt) -> TextSize {
    range_start(&stmt_range(s))
}

fn expr_range(e: &ast::Expr) -> TextRange {
    use ast::Ranged;
    e.range()
}

fn expr_start(e: &ast::Expr) -> TextSize {
    range_start(&expr_range(e))
}

fn stmt_kind_name(s: &ast::Stmt) -> &'static str {
    match s {
        ast::Stmt::FunctionDef(_) => "FunctionDef",
        ast::Stmt::AsyncFunctionDef(_) => "AsyncFunctionDef",
        ast::Stmt::ClassDef(_) => "ClassDef",
        ast::Stmt::Return(_) => "Return",
        ast::Stmt::Delete(_) => "Delete",
        ast::Stmt::Assign(_) => "Assign",
        ast::Stmt::TypeAlias(_) => "TypeAlias",
        ast::Stmt::AugAssign(_) => "AugAssign",
        ast::Stmt::AnnAssign(_) => "AnnAssign",
        ast::Stmt::For(_) => "For",
        ast::Stmt::AsyncFor(_) => "AsyncFor",
        ast::Stmt::While(_) => "While",
        ast::Stmt::If(_) => "If",
        ast::Stmt::With(_) => "With",
        ast::Stmt::AsyncWith(_) => "AsyncWith",
        ast::Stmt::Match(_) => "Match",
        ast::Stmt::Raise(_) => "Raise",
        ast::Stmt::Try(_) => "Try",
        ast::Stmt::TryStar(_) => "TryStar",
        ast::Stmt::Assert(_) => "Assert",
        ast::Stmt::Import(_) => "Import",
        ast::Stmt::ImportFrom(_) => "ImportFrom",
        ast::Stmt::Global(_) => "Global",
        ast::Stmt::Nonlocal(_) => "Nonlocal",
        ast::Stmt::Expr(_) => "Expr",
        ast::Stmt::Pass(_) => "Pass",
        ast::Stmt::Break(_) => "Break",
        ast::Stmt::Continue(_) => "Continue",
    }
}

fn expr_kind_name(e: &ast::Expr) -> &'static str {
    match e {
        ast::Expr::BoolOp(_) => "BoolOp",
        ast::Expr::NamedExpr(_) => "NamedExpr",
        ast::Expr::BinOp(_) => "BinOp",
        ast::Expr::UnaryOp(_) => "UnaryOp",
        ast::Expr::Lambda(_) => "Lambda",
        ast::Expr::IfExp(_) => "IfExp",
        ast::Expr::Dict(_) => "Dict",
        ast::Expr::Set(_) => "Set",
        ast::Expr::ListComp(_) => "ListComp",
        ast::Expr::SetComp(_) => "SetComp",
        ast::Expr::DictComp(_) => "DictComp",
        ast::Expr::GeneratorExp(_) => "GeneratorExp",
        ast::Expr::Await(_) => "Await",
        ast::Expr::Yield(_) => "Yield",
        ast::Expr::YieldFrom(_) => "YieldFrom",
        ast::Expr::Compare(_) => "Compare",
        ast::Expr::Call(_) => "Call",
        ast::Expr::FormattedValue(_) => "FormattedValue",
        ast::Expr::JoinedStr(_) => "JoinedStr",
        ast::Expr::Constant(_) => "Constant",
        ast::Expr::Attribute(_) => "Attribute",
        ast::Expr::Subscript(_) => "Subscript",
        ast::Expr::Starred(_) => "Starred",
        ast::Expr::Name(_) => "Name",
        ast::Expr::List(_) => "List",
        ast::Expr::Tuple(_) => "Tuple",
        ast::Expr::Slice(_) => "Slice",
    }
}

// ---------------------------------------------------------------------------
// Rendering

/// Renders a statement back to Python source.
///
/// Simple statements are rendered canonically; compound statements
/// (definitions, loops and everything in `Other`) reproduce their original
/// dedented source.
pub fn render_stmt(stmt: &Stmt) -> String {
    match stmt {
        Stmt::Import(s) => format!("import {}", render_aliases(&s.names)),
        Stmt::ImportFrom(s) => format!(
            "from {}{} import {}",
            ".".repeat(s.level as usize),
            s.module.as_deref().unwrap_or(""),
            render_aliases(&s.names)
        ),
        Stmt::Assign(s) => {
            let mut out = String::new();
            for t in &s.targets {
                out.push_str(&render_expr(t));
                out.push_str(" = ");
            }
            out.push_str(&render_expr(&s.value));
            out
        }
        Stmt::AugAssign(s) => format!(
            "{} {}= {}",
            render_expr(&s.target),
            s.op,
            render_expr(&s.value)
        ),
        Stmt::Expr(s) => render_expr(&s.value),
        Stmt::FunctionDef(s) => s.source.clone(),
        Stmt::For(s) => s.source.clone(),
        Stmt::Other(s) => s.source.clone(),
    }
}

fn render_aliases(names: &[ImportAlias]) -> String {
    names
        .iter()
        .map(|a| match &a.asname {
            Some(as_) => format!("{} as {}", a.name, as_),
            None => a.name.clone(),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Renders an expression back to Python source.
pub fn render_expr(expr: &Expr) -> String {
    match expr {
        Expr::Call(c) => {
            let mut parts: Vec<String> = c.args.iter().map(render_expr).collect();
            parts.extend(c.keywords.iter().map(|k| match &k.name {
                Some(name) => format!("{name}={}", render_expr(&k.value)),
                None => format!("**{}", render_expr(&k.value)),
            }));
            format!("{}({})", render_postfix_base(&c.func), parts.join(", "))
        }
        Expr::Attribute(a) => format!("{}.{}", render_postfix_base(&a.value), a.attr),
        Expr::Name(n) => n.id.clone(),
        Expr::Subscript(s) => format!(
            "{}[{}]",
            render_postfix_base(&s.value),
            render_expr(&s.index)
        ),
        Expr::Lambda(l) => {
            let params = render_params(&l.params);
            if params.is_empty() {
                format!("lambda: {}", render_expr(&l.body))
            } else {
                format!("lambda {params}: {}", render_expr(&l.body))
            }
        }
        Expr::MappingLiteral(m) => {
            let entries: Vec<String> = m
                .entries
                .iter()
                .map(|e| match &e.key {
                    Some(k) => format!("{}: {}", render_expr(k), render_expr(&e.value)),
                    None => format!("**{}", render_postfix_base(&e.value)),
                })
                .collect();
            format!("{{{}}}", entries.join(", "))
        }
        Expr::Constant(c) => c.text.clone(),
        Expr::Other(o) => o.text.clone(),
    }
}

/// Operand of `.attr`, `(...)` or `[...]`; parenthesized unless atomic.
fn render_postfix_base(expr: &Expr) -> String {
    let atomic = match expr {
        Expr::Call(_)
        | Expr::Attribute(_)
        | Expr::Name(_)
        | Expr::Subscript(_)
        | Expr::MappingLiteral(_) => true,
        Expr::Constant(c) => matches!(
            c.value,
            ConstValue::Str(_) | ConstValue::Bytes(_) | ConstValue::None | ConstValue::Bool(_)
        ),
        Expr::Lambda(_) => false,
        Expr::Other(o) => matches!(
            o.kind_name.as_str(),
            "List" | "ListComp" | "Set" | "SetComp" | "DictComp" | "JoinedStr"
        ),
    };
    let text = render_expr(expr);
    if atomic {
        text
    } else {
        format!("({text})")
    }
}

fn render_params(params: &[Param]) -> String {
    let mut out: Vec<String> = Vec::new();
    let mut saw_posonly = false;
    let mut saw_star = false;
    for p in params {
        if saw_posonly && p.kind != ParamKind::PositionalOnly {
            out.push("/".to_string());
            saw_posonly = false;
        }
        let default = p
            .default
            .as_ref()
            .map(|d| format!("={}", render_expr(d)))
            .unwrap_or_default();
        match p.kind {
            ParamKind::PositionalOnly => {
                saw_posonly = true;
                out.push(format!("{}{default}", p.name));
            }
            ParamKind::Positional => out.push(format!("{}{default}", p.name)),
            ParamKind::VarPositional => {
                saw_star = true;
                out.push(format!("*{}", p.name));
            }
            ParamKind::KeywordOnly => {
                if !saw_star {
                    out.push("*".to_string());
                    saw_star = true;
                }
                out.push(format!("{}{default}", p.name));
            }
            ParamKind::VarKeyword => out.push(format!("**{}", p.name)),
        }
    }
    if saw_posonly {
        out.push("/".to_string());
    }
    out.join(", ")
}

/// Renders either kind of node.
pub fn render_source(node: NodeRef<'_>) -> String {
    match node {
        NodeRef::Stmt(s) => render_stmt(s),
        NodeRef::Expr(e) => render_expr(e),
    }
}

#[derive(Debug, Clone, Copy)]
pub enum NodeRef<'a> {
    Stmt(&'a Stmt),
    Expr(&'a Expr),
}

// ---------------------------------------------------------------------------
// Traversal

/// Per-kind callbacks for [`walk`]. Every method defaults to a no-op.
#[allow(unused_variables)]
pub trait Visitor {
    fn visit_import(&mut self, node: &ImportStmt) {}
    fn visit_import_from(&mut self, node: &ImportFromStmt) {}
    fn visit_assign(&mut self, node: &AssignStmt) {}
    fn visit_aug_assign(&mut self, node: &AugAssignStmt) {}
    fn visit_expr_stmt(&mut self, node: &ExprStmt) {}
    fn visit_function_def(&mut self, node: &FunctionDefStmt) {}
    fn visit_for(&mut self, node: &ForStmt) {}
    fn visit_other_stmt(&mut self, node: &OtherStmt) {}

    fn visit_call(&mut self, node: &CallExpr) {}
    fn visit_attribute(&mut self, node: &AttributeExpr) {}
    fn visit_name(&mut self, node: &NameExpr) {}
    fn visit_subscript(&mut self, node: &SubscriptExpr) {}
    fn visit_lambda(&mut self, node: &LambdaExpr) {}
    fn visit_mapping(&mut self, node: &MappingLiteralExpr) {}
    fn visit_constant(&mut self, node: &ConstantExpr) {}
    fn visit_other_expr(&mut self, node: &OtherExpr) {}
}

/// Depth-first, pre-order traversal in document order. Every statement and
/// expression node is visited exactly once.
pub fn walk<V: Visitor + ?Sized>(tree: &SyntaxTree, visitor: &mut V) {
    for stmt in &tree.statements {
        walk_stmt(stmt, visitor);
    }
}

pub fn walk_stmt<V: Visitor + ?Sized>(stmt: &Stmt, v: &mut V) {
    match stmt {
        Stmt::Import(s) => v.visit_import(s),
        Stmt::ImportFrom(s) => v.visit_import_from(s),
        Stmt::Assign(s) => {
            v.visit_assign(s);
            s.targets.iter().for_each(|t| walk_expr(t, v));
            walk_expr(&s.value, v);
        }
        Stmt::AugAssign(s) => {
            v.visit_aug_assign(s);
            walk_expr(&s.target, v);
            walk_expr(&s.value, v);
        }
        Stmt::Expr(s) => {
            v.visit_expr_stmt(s);
            walk_expr(&s.value, v);
        }
        Stmt::FunctionDef(s) => {
            v.visit_function_def(s);
            s.header.iter().for_each(|e| walk_expr(e, v));
            s.body.iter().for_each(|b| walk_stmt(b, v));
        }
        Stmt::For(s) => {
            v.visit_for(s);
            walk_expr(&s.target, v);
            walk_expr(&s.iter, v);
            s.body.iter().for_each(|b| walk_stmt(b, v));
            s.orelse.iter().for_each(|b| walk_stmt(b, v));
        }
        Stmt::Other(s) => {
            v.visit_other_stmt(s);
            for child in &s.children {
                match child {
                    Child::Stmt(c) => walk_stmt(c, v),
                    Child::Expr(c) => walk_expr(c, v),
                }
            }
        }
    }
}

pub fn walk_expr<V: Visitor + ?Sized>(expr: &Expr, v: &mut V) {
    match expr {
        Expr::Call(c) => {
            v.visit_call(c);
            walk_expr(&c.func, v);
            c.args.iter().for_each(|a| walk_expr(a, v));
            c.keywords.iter().for_each(|k| walk_expr(&k.value, v));
        }
        Expr::Attribute(a) => {
            v.visit_attribute(a);
            walk_expr(&a.value, v);
        }
        Expr::Name(n) => v.visit_name(n),
        Expr::Subscript(s) => {
            v.visit_subscript(s);
            walk_expr(&s.value, v);
            walk_expr(&s.index, v);
        }
        Expr::Lambda(l) => {
            v.visit_lambda(l);
            l.params
                .iter()
                .filter_map(|p| p.default.as_ref())
                .for_each(|d| walk_expr(d, v));
            walk_expr(&l.body, v);
        }
        Expr::MappingLiteral(m) => {
            v.visit_mapping(m);
            for e in &m.entries {
                if let Some(k) = &e.key {
                    walk_expr(k, v);
                }
                walk_expr(&e.value, v);
            }
        }
        Expr::Constant(c) => v.visit_constant(c),
        Expr::Other(o) => {
            v.visit_other_expr(o);
            o.children.iter().for_each(|c| walk_expr(c, v));
        }
    }
}

/// Collects every `NameExpr` identifier under a statement, in visit order.
pub fn names_in_stmt(stmt: &Stmt) -> Vec<String> {
    struct Names(Vec<String>);
    impl Visitor for Names {
        fn visit_name(&mut self, node: &NameExpr) {
            self.0.push(node.id.clone());
        }
    }
    let mut names = Names(Vec::new());
    walk_stmt(stmt, &mut names);
    names.0
}

// ---------------------------------------------------------------------------
// Structural comparison

impl SyntaxTree {
    /// Equality that ignores source positions.
    pub fn structurally_eq(&self, other: &SyntaxTree) -> bool {
        self.without_spans() == other.without_spans()
    }

    pub fn without_spans(&self) -> SyntaxTree {
        let mut copy = self.clone();
        copy.statements.iter_mut().for_each(clear_stmt_spans);
        copy
    }
}

/// Equality of two expressions ignoring source positions.
pub fn exprs_structurally_eq(a: &Expr, b: &Expr) -> bool {
    let (mut a, mut b) = (a.clone(), b.clone());
    clear_expr_spans(&mut a);
    clear_expr_spans(&mut b);
    a == b
}

fn clear_stmt_spans(stmt: &mut Stmt) {
    match stmt {
        Stmt::Import(s) => s.span = Span::default(),
        Stmt::ImportFrom(s) => s.span = Span::default(),
        Stmt::Assign(s) => {
            s.span = Span::default();
            s.targets.iter_mut().for_each(clear_expr_spans);
            clear_expr_spans(&mut s.value);
        }
        Stmt::AugAssign(s) => {
            s.span = Span::default();
            clear_expr_spans(&mut s.target);
            clear_expr_spans(&mut s.value);
        }
        Stmt::Expr(s) => {
            s.span = Span::default();
            clear_expr_spans(&mut s.value);
        }
        Stmt::FunctionDef(s) => {
            s.span = Span::default();
            s.header.iter_mut().for_each(clear_expr_spans);
            s.body.iter_mut().for_each(clear_stmt_spans);
        }
        Stmt::For(s) => {
            s.span = Span::default();
            clear_expr_spans(&mut s.target);
            clear_expr_spans(&mut s.iter);
            s.body.iter_mut().for_each(clear_stmt_spans);
            s.orelse.iter_mut().for_each(clear_stmt_spans);
        }
        Stmt::Other(s) => {
            s.span = Span::default();
            for child in &mut s.children {
                match child {
                    Child::Stmt(c) => clear_stmt_spans(c),
                    Child::Expr(c) => clear_expr_spans(c),
                }
            }
        }
    }
}

fn clear_expr_spans(expr: &mut Expr) {
    match expr {
        Expr::Call(c) => {
            c.span = Span::default();
            clear_expr_spans(&mut c.func);
            c.args.iter_mut().for_each(clear_expr_spans);
            c.keywords
                .iter_mut()
                .for_each(|k| clear_expr_spans(&mut k.value));
        }
        Expr::Attribute(a) => {
            a.span = Span::default();
            clear_expr_spans(&mut a.value);
        }
        Expr::Name(n) => n.span = Span::default(),
        Expr::Subscript(s) => {
            s.span = Span::default();
            clear_expr_spans(&mut s.value);
            clear_expr_spans(&mut s.index);
        }
        Expr::Lambda(l) => {
            l.span = Span::default();
            l.params
                .iter_mut()
                .filter_map(|p| p.default.as_mut())
                .for_each(clear_expr_spans);
            clear_expr_spans(&mut l.body);
        }
        Expr::MappingLiteral(m) => {
            m.span = Span::default();
            for e in &mut m.entries {
                if let Some(k) = &mut e.key {
                    clear_expr_spans(k);
                }
                clear_expr_spans(&mut e.value);
            }
        }
        Expr::Constant(c) => c.span = Span::default(),
        Expr::Other(o) => {
            o.span = Span::default();
            o.children.iter_mut().for_each(clear_expr_spans);
        }
    }
}
