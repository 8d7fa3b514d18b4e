//! Parser for FL segments.
//!
//! ```text
//! description := head block ("," block)* [";"]
//! head        := node [creator]
//! node        := [every|most|some] [prefix#]name | 'quoted'
//! block       := relation [creator] ":" target+
//! target      := (node | "[" description "]") [creator]
//! creator     := "(" user ")"
//! ```
//!
//! One description per line. An indented line that starts with a node is a
//! specialization of the nearest shallower head; one that starts with
//! `relation:` adds blocks to it.

use std::collections::BTreeMap;

use super::ast::{Block, Directives, FlDescription, Node, Span, Target, TargetValue};
use super::lexer::{lex, FlError, Line, LineKind, Tok, Token};
use crate::ids::UserId;
use crate::model::Quantifier;

const QUANTIFIER_LIKE: &[&str] = &[
    "a", "an", "any", "all", "no", "none", "each", "few", "many", "several", "one", "two",
    "three", "at_least", "at_most", "exactly", "only",
];

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseOutput {
    pub descriptions: Vec<FlDescription>,
    pub directives: Directives,
    pub errors: Vec<FlError>,
    pub warnings: Vec<FlError>,
}

/// Parses a segment, returning the first error if there is any.
pub fn parse(text: &str) -> Result<Vec<FlDescription>, FlError> {
    let mut out = parse_segment(text);
    if out.errors.is_empty() {
        Ok(out.descriptions)
    } else {
        Err(out.errors.remove(0))
    }
}

fn keyword_quantifier(word: &str) -> Option<Quantifier> {
    match word {
        "every" => Some(Quantifier::Every),
        "most" => Some(Quantifier::Most),
        "some" => Some(Quantifier::Some),
        _ => None,
    }
}

fn quantifier_like(word: &str) -> bool {
    QUANTIFIER_LIKE.contains(&word.to_ascii_lowercase().as_str())
        || word.chars().all(|c| c.is_ascii_digit())
}

fn term(word: &str, span: Span, quantifier: Option<Quantifier>) -> Result<Node, FlError> {
    let malformed = || FlError::MalformedIdentifier {
        text: word.to_string(),
        span,
    };
    let (prefix, name) = match word.split_once('#') {
        None => (None, word),
        Some((p, n)) => {
            if n.contains('#') || UserId::new(p).is_err() {
                return Err(malformed());
            }
            (Some(p.to_string()), n)
        }
    };
    if name.is_empty() {
        return Err(malformed());
    }
    Ok(Node::Term {
        quantifier,
        prefix,
        name: name.to_string(),
        span,
    })
}

fn word_of(t: &Token) -> Option<&str> {
    match &t.tok {
        Tok::Word(w) => Some(w),
        _ => None,
    }
}

/// A node written as one or more words (`every pm#bird`, `pm#bird`).
fn node_from_words(words: &[&Token]) -> Result<Node, FlError> {
    let span = words[0].span.to(words[words.len() - 1].span);
    let text = |ws: &[&Token]| ws.iter().filter_map(|t| word_of(t)).collect::<Vec<_>>().join(" ");
    match words {
        [one] => term(word_of(one).expect("word"), one.span, None),
        [q, name] => {
            let qw = word_of(q).expect("word");
            if let Some(quant) = keyword_quantifier(qw) {
                term(word_of(name).expect("word"), name.span, Some(quant))
            } else if quantifier_like(qw) {
                Err(FlError::UnknownQuantifier {
                    word: qw.to_string(),
                    span: q.span,
                })
            } else {
                Err(FlError::MalformedIdentifier {
                    text: text(words),
                    span,
                })
            }
        }
        _ => Err(FlError::MalformedIdentifier {
            text: text(words),
            span,
        }),
    }
}

struct LineParser<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'a> LineParser<'a> {
    fn new(toks: &'a [Token], line: usize) -> Self {
        let end_col = toks.last().map_or(1, |t| t.span.column + t.span.len);
        LineParser {
            toks,
            pos: 0,
            line,
            end_col,
        }
    }

    fn at(&self, k: usize) -> Option<&'a Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn span_here(&self) -> Span {
        self.toks
            .get(self.pos)
            .map_or(Span::new(self.line, self.end_col, 1), |t| t.span)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    /// `( word )` at offset `k`.
    fn creator_at(&self, k: usize) -> bool {
        matches!(
            (self.at(k), self.at(k + 1), self.at(k + 2)),
            (Some(Tok::LParen), Some(Tok::Word(_)), Some(Tok::RParen))
        )
    }

    /// Whether the tokens at the cursor open a block: `relation [creator] :`.
    fn block_start(&self) -> bool {
        matches!(self.at(0), Some(Tok::Word(_)))
            && (matches!(self.at(1), Some(Tok::Colon))
                || (self.creator_at(1) && matches!(self.at(4), Some(Tok::Colon))))
    }

    fn creator(&mut self) -> Result<Option<String>, FlError> {
        if !matches!(self.at(0), Some(Tok::LParen)) {
            return Ok(None);
        }
        let open = self.span_here();
        match (self.at(1), self.at(2)) {
            (Some(Tok::Word(w)), Some(Tok::RParen)) => {
                let span = self.toks[self.pos + 1].span;
                if UserId::new(w.as_str()).is_err() {
                    return Err(FlError::MalformedIdentifier {
                        text: w.clone(),
                        span,
                    });
                }
                self.pos += 3;
                Ok(Some(w.clone()))
            }
            _ => Err(FlError::syntax("expected `(user)`", open)),
        }
    }

    fn description(&mut self, nested: bool) -> Result<FlDescription, FlError> {
        let head = match self.at(0) {
            Some(Tok::Quoted(text)) => {
                let span = self.span_here();
                self.pos += 1;
                Node::Quoted {
                    text: text.clone(),
                    span,
                }
            }
            Some(Tok::Word(_)) => {
                let mut j = self.pos;
                while matches!(self.toks.get(j).map(|t| &t.tok), Some(Tok::Word(_))) {
                    j += 1;
                }
                let words: Vec<&Token> = self.toks[self.pos..j].iter().collect();
                let after = j - self.pos;
                let opens_block = matches!(self.at(after), Some(Tok::Colon))
                    || (self.creator_at(after) && matches!(self.at(after + 3), Some(Tok::Colon)));
                let head_words = if opens_block {
                    &words[..words.len() - 1]
                } else {
                    &words[..]
                };
                if head_words.is_empty() {
                    let rel = words[0];
                    return Err(FlError::syntax(
                        format!("relation `{}` has no head", word_of(rel).unwrap_or("")),
                        rel.span,
                    ));
                }
                let node = node_from_words(head_words)?;
                self.pos += head_words.len();
                node
            }
            _ => return Err(FlError::syntax("expected a term", self.span_here())),
        };
        let mut d = FlDescription::new(head);
        d.head_creator = self.creator()?;
        while matches!(self.at(0), Some(Tok::Word(_))) {
            d.blocks.push(self.block()?);
            if matches!(self.at(0), Some(Tok::Comma)) {
                self.pos += 1;
                if self.at_end() && !nested {
                    break;
                }
                if !self.block_start() {
                    return Err(FlError::syntax("expected a relation after ','", self.span_here()));
                }
            } else {
                break;
            }
        }
        if matches!(self.at(0), Some(Tok::Semi)) {
            if nested {
                return Err(FlError::syntax("';' inside brackets", self.span_here()));
            }
            d.terminated = true;
            self.pos += 1;
        }
        if nested {
            if !matches!(self.at(0), Some(Tok::RBracket)) {
                return Err(FlError::syntax("expected ']'", self.span_here()));
            }
        } else if !self.at_end() {
            return Err(self.unexpected());
        }
        Ok(d)
    }

    fn unexpected(&self) -> FlError {
        let what = match self.at(0) {
            Some(Tok::Word(w)) => format!("`{w}`"),
            Some(Tok::Quoted(_)) => "quoted term".into(),
            Some(Tok::Colon) => "':'".into(),
            Some(Tok::Comma) => "','".into(),
            Some(Tok::Semi) => "';'".into(),
            Some(Tok::LParen) => "'('".into(),
            Some(Tok::RParen) => "')'".into(),
            Some(Tok::LBracket) => "'['".into(),
            Some(Tok::RBracket) => "']'".into(),
            None => "end of line".into(),
        };
        FlError::syntax(format!("unexpected {what}"), self.span_here())
    }

    fn block(&mut self) -> Result<Block, FlError> {
        let span = self.span_here();
        let relation = match self.at(0) {
            Some(Tok::Word(w)) => w.clone(),
            _ => return Err(FlError::syntax("expected a relation name", span)),
        };
        if let Node::Term { .. } = term(&relation, span, None)? {}
        self.pos += 1;
        let creator = self.creator()?;
        if !matches!(self.at(0), Some(Tok::Colon)) {
            return Err(FlError::syntax(
                format!("expected ':' after relation `{relation}`"),
                self.span_here(),
            ));
        }
        self.pos += 1;
        let mut targets = Vec::new();
        loop {
            let value = match self.at(0) {
                Some(Tok::Word(_)) if self.block_start() => {
                    return Err(FlError::syntax("missing ',' before relation", self.span_here()));
                }
                Some(Tok::Word(w)) => {
                    let s = self.span_here();
                    let quant = keyword_quantifier(w)
                        .filter(|_| matches!(self.at(1), Some(Tok::Word(_))));
                    if let Some(q) = quant {
                        self.pos += 1;
                        let (name, ns) = match self.at(0) {
                            Some(Tok::Word(n)) => (n.clone(), self.span_here()),
                            _ => unreachable!("checked above"),
                        };
                        self.pos += 1;
                        TargetValue::Node(term(&name, ns, Some(q))?)
                    } else {
                        self.pos += 1;
                        TargetValue::Node(term(w, s, None)?)
                    }
                }
                Some(Tok::Quoted(text)) => {
                    let s = self.span_here();
                    self.pos += 1;
                    TargetValue::Node(Node::Quoted {
                        text: text.clone(),
                        span: s,
                    })
                }
                Some(Tok::LBracket) => {
                    self.pos += 1;
                    let inner = self.description(true)?;
                    if inner.blocks.is_empty() {
                        return Err(FlError::syntax("nested description has no relation", span));
                    }
                    self.pos += 1;
                    TargetValue::Nested(Box::new(inner))
                }
                _ => break,
            };
            let creator = self.creator()?;
            targets.push(Target { value, creator });
        }
        if targets.is_empty() {
            return Err(FlError::syntax(format!("relation `{relation}` has no target"), span));
        }
        Ok(Block {
            relation,
            span,
            creator,
            targets,
        })
    }

    /// A continuation line: `relation: targets, ...`.
    fn blocks_only(&mut self) -> Result<(Vec<Block>, bool), FlError> {
        let mut blocks = Vec::new();
        loop {
            blocks.push(self.block()?);
            if matches!(self.at(0), Some(Tok::Comma)) {
                self.pos += 1;
                if self.at_end() {
                    break;
                }
            } else {
                break;
            }
        }
        let terminated = matches!(self.at(0), Some(Tok::Semi));
        if terminated {
            self.pos += 1;
        }
        if !self.at_end() {
            return Err(self.unexpected());
        }
        Ok((blocks, terminated))
    }
}

struct Frame {
    indent: usize,
    path: Vec<usize>,
    takes_children: bool,
    child_indent: Option<usize>,
    /// The line failed to parse; lines below it are skipped.
    poisoned: bool,
}

fn at_path<'a>(roots: &'a mut [FlDescription], path: &[usize]) -> &'a mut FlDescription {
    let mut d = &mut roots[path[0]];
    for &i in &path[1..] {
        d = &mut d.children[i];
    }
    d
}

fn directive(name: &str, args: &[(String, Span)], span: Span, out: &mut Directives) -> Result<(), FlError> {
    let user = |(w, s): &(String, Span)| {
        UserId::new(w.as_str())
            .map(|_| w.clone())
            .map_err(|_| FlError::MalformedIdentifier {
                text: w.clone(),
                span: *s,
            })
    };
    match name {
        "creator" => match args {
            [one] => {
                out.creator = Some(user(one)?);
                Ok(())
            }
            _ => Err(FlError::syntax("`@creator` takes one user", span)),
        },
        "user" => {
            let Some((first, rest)) = args.split_first() else {
                return Err(FlError::syntax("`@user` needs a name", span));
            };
            let name = user(first)?;
            let mut attributes = BTreeMap::new();
            for (kv, s) in rest {
                match kv.split_once('=') {
                    Some((k, v)) if !k.is_empty() && !v.is_empty() => {
                        attributes.insert(k.to_string(), v.to_string());
                    }
                    _ => return Err(FlError::syntax("expected key=value", *s)),
                }
            }
            out.users.push((name, attributes));
            Ok(())
        }
        other => Err(FlError::syntax(format!("unknown directive `@{other}`"), span)),
    }
}

/// Parses a segment, collecting every error instead of stopping at the first.
/// Descriptions whose line fails, and lines indented below them, are dropped.
pub fn parse_segment(text: &str) -> ParseOutput {
    let (lines, mut errors) = lex(text);
    let mut out = ParseOutput::default();
    let mut roots: Vec<FlDescription> = Vec::new();
    let mut stack: Vec<Frame> = Vec::new();
    let mut top_indent: Option<usize> = None;
    for line in &lines {
        let line_span = Span::new(line.number, line.start, 1);
        if line.mixed_indent {
            out.warnings.push(FlError::Indentation {
                message: "warning: indentation mixes tabs and spaces".into(),
                span: Span::new(line.number, 1, line.start.saturating_sub(1).max(1)),
            });
        }
        let toks = match &line.kind {
            LineKind::Directive { name, args } => {
                if let Err(e) = directive(name, args, line_span, &mut out.directives) {
                    errors.push(e);
                }
                continue;
            }
            LineKind::Tokens(t) => t,
        };
        while stack.last().is_some_and(|f| f.indent >= line.indent) {
            stack.pop();
        }
        let mut parser = LineParser::new(toks, line.number);
        let continuation = parser.block_start();
        let Some(parent) = stack.last_mut() else {
            if let Some(w) = top_indent.filter(|w| *w != line.indent) {
                errors.push(FlError::Indentation {
                    message: format!("inconsistent indentation: expected {w} columns, found {}", line.indent),
                    span: line_span,
                });
                stack.push(poisoned(line));
                continue;
            }
            top_indent = Some(line.indent);
            if continuation {
                errors.push(FlError::syntax("relation block without a head", line_span));
                continue;
            }
            match parser.description(false) {
                Ok(d) => {
                    stack.push(Frame {
                        indent: line.indent,
                        path: vec![roots.len()],
                        takes_children: d.can_take_children(),
                        child_indent: None,
                        poisoned: false,
                    });
                    roots.push(d);
                }
                Err(e) => {
                    errors.push(e);
                    stack.push(poisoned(line));
                }
            }
            continue;
        };
        if parent.poisoned {
            stack.push(poisoned(line));
            continue;
        }
        if !parent.takes_children {
            errors.push(FlError::Indentation {
                message: "indented under a line that cannot take children".into(),
                span: line_span,
            });
            stack.push(poisoned(line));
            continue;
        }
        match parent.child_indent {
            Some(w) if w != line.indent => {
                errors.push(FlError::Indentation {
                    message: format!(
                        "inconsistent indentation: expected {w} columns, found {}",
                        line.indent
                    ),
                    span: line_span,
                });
                stack.push(poisoned(line));
                continue;
            }
            _ => parent.child_indent = Some(line.indent),
        }
        let path = parent.path.clone();
        if continuation {
            match parser.blocks_only() {
                Ok((blocks, terminated)) => {
                    let d = at_path(&mut roots, &path);
                    d.blocks.extend(blocks);
                    d.terminated |= terminated;
                    if terminated {
                        parent.takes_children = false;
                    }
                }
                Err(e) => errors.push(e),
            }
            continue;
        }
        match parser.description(false) {
            Ok(d) => {
                let takes = d.can_take_children();
                let p = at_path(&mut roots, &path);
                let mut child_path = path;
                child_path.push(p.children.len());
                p.children.push(d);
                stack.push(Frame {
                    indent: line.indent,
                    path: child_path,
                    takes_children: takes,
                    child_indent: None,
                    poisoned: false,
                });
            }
            Err(e) => {
                errors.push(e);
                stack.push(poisoned(line));
            }
        }
    }
    roots.retain(|d| {
        let empty = d.blocks.is_empty() && d.children.is_empty() && !d.terminated;
        if empty {
            errors.push(FlError::syntax(
                format!("`{}` has no relation block", d.head.text()),
                d.head.span(),
            ));
        }
        !empty
    });
    errors.sort_by_key(|e| (e.span().line, e.span().column));
    out.descriptions = roots;
    out.errors = errors;
    out
}

fn poisoned(line: &Line) -> Frame {
    Frame {
        indent: line.indent,
        path: Vec::new(),
        takes_children: false,
        child_indent: None,
        poisoned: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl::lexer::ErrorClass;

    #[test]
    fn schema_instance() {
        let d = parse("wfm#workflow part: wfm#task, definition: 'ordered set of tasks'").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].blocks.len(), 2);
        assert_eq!(d[0].blocks[0].relation, "part");
        assert_eq!(d[0].blocks[1].targets[0].node(), &Node::quoted("ordered set of tasks"));
    }

    #[test]
    fn per_target_creator() {
        let d = parse("pm#bird agent_of: pm#flight (John)").unwrap();
        assert_eq!(d[0].blocks[0].targets[0].creator.as_deref(), Some("John"));
        let d = parse("pm#bird agent_of (John): pm#flight pm#x").unwrap();
        assert_eq!(d[0].blocks[0].creator.as_deref(), Some("John"));
        assert_eq!(d[0].blocks[0].targets.len(), 2);
        let d = parse("'a bird flies' (John) argument: 'why not'").unwrap();
        assert_eq!(d[0].head_creator.as_deref(), Some("John"));
    }

    #[test]
    fn missing_target_is_syntax_error() {
        let e = parse("x :").unwrap_err();
        assert_eq!(e.class(), ErrorClass::Syntactic);
        let e = parse("x part:").unwrap_err();
        assert!(e.to_string().contains("no target"), "{e}");
        assert_eq!(parse("a part: b c use: d").unwrap_err().class(), ErrorClass::Syntactic);
    }

    #[test]
    fn quantifiers() {
        let d = parse("most pm#bird agent_of: some pm#flight").unwrap();
        assert_eq!(d[0].head.quantifier(), Some(Quantifier::Most));
        assert_eq!(d[0].blocks[0].targets[0].node().quantifier(), Some(Quantifier::Some));
        assert!(matches!(
            parse("several pm#bird agent_of: pm#flight").unwrap_err(),
            FlError::UnknownQuantifier { .. }
        ));
        let e = parse("wn#Bird With Space").unwrap_err();
        assert!(matches!(e, FlError::MalformedIdentifier { .. }), "{e:?}");
        assert_eq!(e.span().column, 1);
    }

    #[test]
    fn indentation_children_and_continuations() {
        let text = "seed#thing subtype: pm#a\n  pm#b\n    pm#c part: pm#d\n  part: pm#e\n";
        let d = parse(text).unwrap();
        assert_eq!(d.len(), 1);
        let a = &d[0];
        assert_eq!(a.blocks.len(), 2, "continuation line adds a block");
        assert_eq!(a.children.len(), 1);
        assert_eq!(a.children[0].children[0].blocks.len(), 1);
    }

    #[test]
    fn indentation_errors() {
        let out = parse_segment("pm#a part: pm#b;\n  pm#c\n");
        assert_eq!(out.errors[0].class(), ErrorClass::Indentation);
        let out = parse_segment("pm#a part: 'x'\n  pm#c\n     pm#d\n   pm#e\n");
        assert_eq!(out.errors.len(), 1, "{:?}", out.errors);
        assert_eq!(out.errors[0].span().line, 4);
        let out = parse_segment("'lit' part: pm#x\n  pm#c\n");
        assert_eq!(out.errors[0].class(), ErrorClass::Indentation);
        let out = parse_segment("pm#a part: pm#b\n\t pm#c\n");
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn lone_head_needs_a_block() {
        assert!(parse("pm#a").is_err());
        assert!(parse("pm#a;").is_ok(), "a terminated head only names an object");
        assert!(parse("pm#a\n  pm#b\n").is_ok());
    }

    #[test]
    fn nested_descriptions() {
        let d = parse("pm#a part: [pm#b part: pm#c, url: 'u'] (pm) pm#d").unwrap();
        let t = &d[0].blocks[0].targets;
        assert_eq!(t.len(), 2);
        assert!(matches!(&t[0].value, TargetValue::Nested(n) if n.blocks.len() == 2));
        assert_eq!(t[0].creator.as_deref(), Some("pm"));
    }

    #[test]
    fn directives_are_collected() {
        let out = parse_segment("@creator pm\n@user John degree=PhD\nbird part: wing\n");
        assert!(out.errors.is_empty(), "{:?}", out.errors);
        assert_eq!(out.directives.creator.as_deref(), Some("pm"));
        assert_eq!(out.directives.users[0].1["degree"], "PhD");
    }
}
