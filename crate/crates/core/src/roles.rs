//! What a name used inside a transform call stands for: a function
//! definition, a lambda, or a plain variable, and which of the three value
//! groups (mappings, functions, lambdas) an argument falls into.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::syntax::{self, AssignStmt, Expr, FunctionDefStmt, SyntaxTree, Visitor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ValueKind {
    DictionaryLiteral,
    NamedFunction,
    LambdaExpression,
    VariableOther,
}

impl ValueKind {
    pub const ALL: [ValueKind; 4] = [
        ValueKind::DictionaryLiteral,
        ValueKind::NamedFunction,
        ValueKind::LambdaExpression,
        ValueKind::VariableOther,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::DictionaryLiteral => "DictionaryLiteral",
            ValueKind::NamedFunction => "NamedFunction",
            ValueKind::LambdaExpression => "LambdaExpression",
            ValueKind::VariableOther => "VariableOther",
        }
    }

    pub fn parse(s: &str) -> Option<ValueKind> {
        ValueKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TermRole {
    FunctionDefinition,
    LambdaExpression,
    VariableAssignment,
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableRoleReport {
    pub term: String,
    pub role: TermRole,
    pub rendered_source: Option<String>,
    pub message: String,
}

/// Role and defining source of a name referenced by a trace record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableDescriptor {
    pub role: ValueKind,
    pub source: Option<String>,
}

/// Lookup of a bare name's value kind, used when classifying transform
/// arguments.
pub trait NameResolver {
    fn resolve_name(&self, name: &str) -> VariableDescriptor;
}

/// Last definition of every name in a notebook, split by how it was defined.
#[derive(Debug, Clone, Default)]
pub struct RoleIndex {
    functions: HashMap<String, String>,
    lambdas: HashMap<String, String>,
    variables: HashMap<String, Expr>,
}

impl RoleIndex {
    pub fn build(tree: &SyntaxTree) -> Self {
        let mut index = RoleIndex::default();
        syntax::walk(tree, &mut index);
        index
    }

    pub fn report(&self, term: &str) -> VariableRoleReport {
        let (role, rendered_source, message) = if let Some(src) = self.functions.get(term) {
            (
                TermRole::FunctionDefinition,
                Some(src.clone()),
                format!("Function definition:\n{src}"),
            )
        } else if let Some(src) = self.lambdas.get(term) {
            (
                TermRole::LambdaExpression,
                Some(src.clone()),
                format!("Lambda function:\n{src}"),
            )
        } else if let Some(value) = self.variables.get(term) {
            let value = syntax::render_expr(value);
            let message = format!("'{term}' is a variable with value: {value}");
            (TermRole::VariableAssignment, Some(value), message)
        } else {
            (TermRole::NotFound, None, format!("'{term}' was not found"))
        };
        VariableRoleReport {
            term: term.to_string(),
            role,
            rendered_source,
            message,
        }
    }

    pub fn classify(&self, expr: &Expr) -> ValueKind {
        match expr {
            Expr::MappingLiteral(_) => ValueKind::DictionaryLiteral,
            Expr::Lambda(_) => ValueKind::LambdaExpression,
            Expr::Name(n) => self.classify_name(&n.id),
            _ => ValueKind::VariableOther,
        }
    }

    // One hop only: a name bound to another name is not followed further.
    fn classify_name(&self, name: &str) -> ValueKind {
        if self.functions.contains_key(name) {
            ValueKind::NamedFunction
        } else if self.lambdas.contains_key(name) {
            ValueKind::LambdaExpression
        } else if let Some(Expr::MappingLiteral(_)) = self.variables.get(name) {
            ValueKind::DictionaryLiteral
        } else {
            ValueKind::VariableOther
        }
    }
}

impl Visitor for RoleIndex {
    fn visit_function_def(&mut self, node: &FunctionDefStmt) {
        self.functions
            .insert(node.name.clone(), node.source.clone());
    }

    fn visit_assign(&mut self, node: &AssignStmt) {
        for target in &node.targets {
            let Some(name) = target.as_name() else {
                continue;
            };
            match &node.value {
                Expr::Lambda(_) => {
                    self.lambdas
                        .insert(name.to_string(), syntax::render_expr(&node.value));
                }
                value => {
                    self.variables.insert(name.to_string(), value.clone());
                }
            }
        }
    }
}

impl NameResolver for RoleIndex {
    fn resolve_name(&self, name: &str) -> VariableDescriptor {
        VariableDescriptor {
            role: self.classify_name(name),
            source: self.report(name).rendered_source,
        }
    }
}

/// Reports whether `term` is defined in `tree` as a function, a lambda or a
/// variable. Function definitions take precedence over lambda bindings,
/// which take precedence over other assignments; within a group the last
/// definition in document order wins.
pub fn analyze_term(tree: &SyntaxTree, term: &str) -> VariableRoleReport {
    RoleIndex::build(tree).report(term)
}

pub fn classify_value(expr: &Expr, tree: &SyntaxTree) -> ValueKind {
    RoleIndex::build(tree).classify(expr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_module, Stmt};

    fn tree(src: &str) -> SyntaxTree {
        parse_module(src).unwrap()
    }

    fn expr(src: &str) -> Expr {
        match parse_module(src).unwrap().statements.remove(0) {
            Stmt::Expr(e) => e.value,
            other => panic!("not an expression: {other:?}"),
        }
    }

    #[test]
    fn function_definition_report() {
        let t = tree("def clean(s): return s.strip()");
        let r = analyze_term(&t, "clean");
        assert_eq!(r.role, TermRole::FunctionDefinition);
        assert_eq!(r.message, "Function definition:\ndef clean(s): return s.strip()");
    }

    #[test]
    fn lambda_binding_report() {
        let r = analyze_term(&tree("f = lambda x: x"), "f");
        assert_eq!(r.role, TermRole::LambdaExpression);
        assert_eq!(r.message, "Lambda function:\nlambda x: x");
    }

    #[test]
    fn variable_report() {
        let r = analyze_term(&tree("mapping = {'m': 0, 'f': 1}"), "mapping");
        assert_eq!(r.role, TermRole::VariableAssignment);
        assert_eq!(
            r.message,
            "'mapping' is a variable with value: {'m': 0, 'f': 1}"
        );
    }

    #[test]
    fn missing_term() {
        let r = analyze_term(&tree("x = 1"), "g");
        assert_eq!(r.role, TermRole::NotFound);
        assert_eq!(r.rendered_source, None);
    }

    #[test]
    fn unrelated_lambda_is_not_attributed() {
        let t = tree("df['a'] = df['a'].apply(lambda v: v * 2)\nscale = 3");
        let r = analyze_term(&t, "scale");
        assert_eq!(r.role, TermRole::VariableAssignment);
        assert_eq!(r.rendered_source.as_deref(), Some("3"));
    }

    #[test]
    fn last_definition_wins_within_group() {
        let t = tree("m = {'a': 1}\nm = {'b': 2}\ndef f(x): return 1\ndef f(x): return 2");
        assert_eq!(analyze_term(&t, "m").rendered_source.as_deref(), Some("{'b': 2}"));
        assert_eq!(
            analyze_term(&t, "f").rendered_source.as_deref(),
            Some("def f(x): return 2")
        );
    }

    #[test]
    fn function_beats_later_assignment() {
        let t = tree("def g(x): return x\ng = 5");
        assert_eq!(analyze_term(&t, "g").role, TermRole::FunctionDefinition);
    }

    #[test]
    fn nested_definitions_are_found() {
        let t = tree("class C:\n    def helper(self):\n        return 1\n");
        assert_eq!(analyze_term(&t, "helper").role, TermRole::FunctionDefinition);
    }

    #[test]
    fn classify_literals_and_names() {
        let t = tree("def clean(s):\n    return s\nm = {'a': 1}\nk = m\nf = lambda x: x\nn = 3");
        assert_eq!(classify_value(&expr("{'a': 1}"), &t), ValueKind::DictionaryLiteral);
        assert_eq!(classify_value(&expr("lambda x: x + 1"), &t), ValueKind::LambdaExpression);
        assert_eq!(classify_value(&expr("clean"), &t), ValueKind::NamedFunction);
        assert_eq!(classify_value(&expr("m"), &t), ValueKind::DictionaryLiteral);
        assert_eq!(classify_value(&expr("f"), &t), ValueKind::LambdaExpression);
        // two hops: k -> m -> literal
        assert_eq!(classify_value(&expr("k"), &t), ValueKind::VariableOther);
        assert_eq!(classify_value(&expr("n"), &t), ValueKind::VariableOther);
        assert_eq!(classify_value(&expr("3"), &t), ValueKind::VariableOther);
        assert_eq!(classify_value(&expr("str.lower"), &t), ValueKind::VariableOther);
    }

    #[test]
    fn value_kind_names_round_trip() {
        for k in ValueKind::ALL {
            assert_eq!(ValueKind::parse(k.as_str()), Some(k));
        }
        assert_eq!(ValueKind::parse("Dictionary"), None);
    }
}
