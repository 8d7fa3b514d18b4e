use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::Quantifier;

/// Source location of a token: 1-based line and column, length in chars.
///
/// Spans never take part in equality, so two trees parsed from differently
/// laid-out text compare equal when their structure does.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
    pub len: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl Span {
    pub fn new(line: usize, column: usize, len: usize) -> Self {
        Span { line, column, len }
    }

    /// Smallest span covering both (same line assumed).
    pub fn to(self, end: Span) -> Span {
        Span {
            line: self.line,
            column: self.column,
            len: (end.column + end.len).saturating_sub(self.column).max(self.len),
        }
    }
}

/// A formal term `[prefix#]name` or a quoted informal term.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Node {
    Term {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quantifier: Option<Quantifier>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prefix: Option<String>,
        name: String,
        span: Span,
    },
    Quoted {
        text: String,
        span: Span,
    },
}

impl Node {
    pub fn term(prefix: Option<&str>, name: &str) -> Self {
        Node::Term {
            quantifier: None,
            prefix: prefix.map(str::to_string),
            name: name.to_string(),
            span: Span::default(),
        }
    }

    pub fn quoted(text: &str) -> Self {
        Node::Quoted {
            text: text.to_string(),
            span: Span::default(),
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Node::Term { span, .. } | Node::Quoted { span, .. } => *span,
        }
    }

    pub fn quantifier(&self) -> Option<Quantifier> {
        match self {
            Node::Term { quantifier, .. } => *quantifier,
            Node::Quoted { .. } => None,
        }
    }

    /// Display form, e.g. `pm#bird` or `'a term'`.
    pub fn text(&self) -> String {
        match self {
            Node::Term { prefix, name, .. } => match prefix {
                Some(p) => format!("{p}#{name}"),
                None => name.clone(),
            },
            Node::Quoted { text, .. } => crate::ids::quote(text),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetValue {
    Node(Node),
    /// `[head rel: ...]`: a target described in place.
    Nested(Box<FlDescription>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub value: TargetValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub creator: Option<String>,
}

impl Target {
    pub fn node(&self) -> &Node {
        match &self.value {
            TargetValue::Node(n) => n,
            TargetValue::Nested(d) => &d.head,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub relation: String,
    pub span: Span,
    /// Applies to every target of the block that has no creator of its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub creator: Option<String>,
    pub targets: Vec<Target>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlDescription {
    pub head: Node,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_creator: Option<String>,
    pub blocks: Vec<Block>,
    /// Ended by `;`; such a line cannot take indented children.
    #[serde(default)]
    pub terminated: bool,
    /// Indented lines starting with a node: specializations of the head.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<FlDescription>,
}

impl FlDescription {
    pub fn new(head: Node) -> Self {
        FlDescription {
            head,
            head_creator: None,
            blocks: Vec::new(),
            terminated: false,
            children: Vec::new(),
        }
    }

    /// Whether indented lines may sit below this one.
    pub fn can_take_children(&self) -> bool {
        !self.terminated && matches!(self.head, Node::Term { .. })
    }

    /// This description and all its descendants, parents first.
    pub fn preorder(&self) -> Vec<&FlDescription> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.preorder());
        }
        out
    }
}

/// `@creator` and `@user` lines of a segment.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directives {
    /// Prefix for unprefixed identifiers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub creator: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub users: Vec<(String, BTreeMap<String, String>)>,
}

/// A piece of FL text together with where it sits in its file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlSegment {
    pub text: String,
    /// File position of the first character of `text`.
    pub line: usize,
    pub column: usize,
}

impl FlSegment {
    /// Maps a segment-relative span to file coordinates.
    pub fn to_file(&self, span: Span) -> Span {
        let column = if span.line <= 1 {
            span.column + self.column - 1
        } else {
            span.column
        };
        Span {
            line: span.line + self.line - 1,
            column,
            len: span.len,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    Informal(String),
    Fl(FlSegment),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlDocument {
    pub segments: Vec<Segment>,
}

impl FlDocument {
    /// A plain FL file: one segment covering the whole text.
    pub fn from_fl(text: &str) -> Self {
        FlDocument {
            segments: vec![Segment::Fl(FlSegment {
                text: text.to_string(),
                line: 1,
                column: 1,
            })],
        }
    }

    pub fn fl_segments(&self) -> impl Iterator<Item = &FlSegment> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Fl(f) => Some(f),
            Segment::Informal(_) => None,
        })
    }
}
