//! Diagnostics for FL documents without changing the knowledge base.
//!
//! Lint parses every segment and then dry-runs the load against a copy of
//! the store, so a clean lint means the same document loads cleanly.

use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::ast::{FlDescription, FlDocument};
use super::lexer::{ErrorClass, FlError};
use super::load::{parse_document, Planner};
use crate::error::KbError;
use crate::ids::UserId;
use crate::store::Store;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintDiagnostic {
    pub line: usize,
    pub column: usize,
    pub class: ErrorClass,
    pub severity: Severity,
    pub message: String,
}

impl LintDiagnostic {
    /// `file:line:col: class: severity: message`
    pub fn render(&self, file: &str) -> String {
        format!(
            "{file}:{}:{}: {}: {}: {}",
            self.line,
            self.column,
            self.class.as_str(),
            self.severity.as_str(),
            self.message
        )
    }
}

pub fn render(file: &str, diagnostics: &[LintDiagnostic]) -> String {
    let mut out = String::new();
    for d in diagnostics {
        let _ = writeln!(out, "{}", d.render(file));
    }
    out
}

fn from_parse(e: &FlError, severity: Severity) -> LintDiagnostic {
    let span = e.span();
    let message = e.to_string();
    let message = message
        .strip_prefix("warning: ")
        .map(str::to_string)
        .unwrap_or(message);
    LintDiagnostic {
        line: span.line,
        column: span.column,
        class: e.class(),
        severity,
        message,
    }
}

fn load_class(e: &KbError) -> ErrorClass {
    match e {
        KbError::UnknownUser(_) | KbError::UnknownRelationType(_) | KbError::BadIdentifier(_) => {
            ErrorClass::Lexical
        }
        _ => ErrorClass::Ontological,
    }
}

/// Blocks repeating a relation and target already given on the same line.
fn duplicates(d: &FlDescription, out: &mut Vec<(usize, usize, String)>) {
    let mut seen = BTreeSet::new();
    for b in &d.blocks {
        for t in &b.targets {
            let n = t.node();
            if !seen.insert((b.relation.clone(), n.text())) {
                let s = n.span();
                out.push((s.line, s.column, format!("`{} {}` is repeated", b.relation, n.text())));
            }
        }
    }
    for c in &d.children {
        duplicates(c, out);
    }
}

/// Lints `doc` as if `user` (default `anonymous`) loaded it into `store`.
pub fn lint(doc: &FlDocument, store: &Store, user: Option<&UserId>) -> Vec<LintDiagnostic> {
    let user = user
        .cloned()
        .unwrap_or_else(|| UserId::new("anonymous").expect("valid user"));
    let mut planner = Planner::new(store, user);
    planner.ensure_user();
    let mut out = Vec::new();
    for (seg, parsed) in parse_document(doc) {
        out.extend(parsed.errors.iter().map(|e| from_parse(e, Severity::Error)));
        out.extend(parsed.warnings.iter().map(|e| from_parse(e, Severity::Warning)));
        let mut dups = Vec::new();
        for d in &parsed.descriptions {
            duplicates(d, &mut dups);
        }
        for (line, column, message) in dups {
            let at = seg.to_file(super::ast::Span::new(line, column, 1));
            out.push(LintDiagnostic {
                line: at.line,
                column: at.column,
                class: ErrorClass::Ontological,
                severity: Severity::Warning,
                message,
            });
        }
        let mut failures = Vec::new();
        for (r, _) in planner.directives(&parsed.directives, super::ast::Span::new(1, 1, 1)) {
            if let Err(f) = r {
                failures.push(f);
            }
        }
        for d in &parsed.descriptions {
            planner.description(d, None, &mut |_, r| {
                if let Err(f) = r {
                    failures.push(f);
                }
            });
        }
        for (span, e) in failures {
            let at = seg.to_file(span);
            out.push(LintDiagnostic {
                line: at.line,
                column: at.column,
                class: load_class(&e),
                severity: Severity::Error,
                message: e.to_string(),
            });
        }
        planner.reset_prefix();
    }
    out.sort_by(|a, b| (a.line, a.column, a.class).cmp(&(b.line, b.column, b.class)));
    out.dedup_by(|a, b| (a.line, a.column, a.class) == (b.line, b.column, b.class));
    out
}

/// Lints FL text or an HTML page.
pub fn lint_text(text: &str, store: &Store, user: Option<&UserId>) -> Vec<LintDiagnostic> {
    match super::html::document(text) {
        Ok(doc) => lint(&doc, store, user),
        Err(e) => vec![from_parse(&e, Severity::Error)],
    }
}
