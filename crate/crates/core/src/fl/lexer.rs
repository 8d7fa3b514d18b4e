//! Line-oriented tokenizer.
//!
//! HTML tags (`<a href=...>`, `</b>`) are removed before tokenizing and take
//! no columns of indentation, so hyper-linked terms read as plain terms.
//! Reported columns still refer to the original text.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::Span;
use crate::ids::is_name_char;

/// Columns a tab advances to (the next multiple of).
pub const TAB_WIDTH: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Lexical,
    Syntactic,
    Ontological,
    Indentation,
}

impl ErrorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Lexical => "lexical",
            ErrorClass::Syntactic => "syntactic",
            ErrorClass::Ontological => "ontological",
            ErrorClass::Indentation => "indentation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FlError {
    #[error("malformed identifier `{text}`")]
    MalformedIdentifier { text: String, span: Span },
    #[error("unexpected character {c:?}")]
    UnexpectedChar { c: char, span: Span },
    #[error("unterminated quoted term")]
    UnterminatedQuote { span: Span },
    #[error("unknown escape `\\{c}` in quoted term")]
    BadEscape { c: char, span: Span },
    #[error("unknown quantifier `{word}` (use every, most or some)")]
    UnknownQuantifier { word: String, span: Span },
    #[error("{message}")]
    Syntax { message: String, span: Span },
    #[error("{message}")]
    Indentation { message: String, span: Span },
    #[error("FL segment opened but never closed")]
    UnterminatedSegment { span: Span },
}

impl FlError {
    pub fn class(&self) -> ErrorClass {
        match self {
            FlError::MalformedIdentifier { .. }
            | FlError::UnexpectedChar { .. }
            | FlError::UnterminatedQuote { .. }
            | FlError::BadEscape { .. } => ErrorClass::Lexical,
            FlError::UnknownQuantifier { .. }
            | FlError::Syntax { .. }
            | FlError::UnterminatedSegment { .. } => ErrorClass::Syntactic,
            FlError::Indentation { .. } => ErrorClass::Indentation,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            FlError::MalformedIdentifier { span, .. }
            | FlError::UnexpectedChar { span, .. }
            | FlError::UnterminatedQuote { span }
            | FlError::BadEscape { span, .. }
            | FlError::UnknownQuantifier { span, .. }
            | FlError::Syntax { span, .. }
            | FlError::Indentation { span, .. }
            | FlError::UnterminatedSegment { span } => *span,
        }
    }

    pub fn span_mut(&mut self) -> &mut Span {
        match self {
            FlError::MalformedIdentifier { span, .. }
            | FlError::UnexpectedChar { span, .. }
            | FlError::UnterminatedQuote { span }
            | FlError::BadEscape { span, .. }
            | FlError::UnknownQuantifier { span, .. }
            | FlError::Syntax { span, .. }
            | FlError::Indentation { span, .. }
            | FlError::UnterminatedSegment { span } => span,
        }
    }

    pub(crate) fn syntax(message: impl Into<String>, span: Span) -> Self {
        FlError::Syntax {
            message: message.into(),
            span,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Word(String),
    Quoted(String),
    Colon,
    Comma,
    Semi,
    LParen,
    RParen,
    LBracket,
    RBracket,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

/// One non-blank source line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Line {
    pub number: usize,
    /// Indentation width in columns.
    pub indent: usize,
    /// Indentation mixes tabs and spaces.
    pub mixed_indent: bool,
    /// Column of the first visible character.
    pub start: usize,
    pub kind: LineKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LineKind {
    /// `@name args...`
    Directive { name: String, args: Vec<(String, Span)> },
    Tokens(Vec<Token>),
}

/// Visible characters of a line with their original 1-based columns.
fn visible_chars(line: &str) -> Vec<(char, usize)> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::with_capacity(chars.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '<' {
            let opens_tag = chars
                .get(i + 1)
                .is_some_and(|n| n.is_ascii_alphabetic() || *n == '/' || *n == '!');
            if opens_tag {
                if let Some(end) = chars[i..].iter().position(|c| *c == '>') {
                    i += end + 1;
                    continue;
                }
            }
        }
        out.push((c, i + 1));
        i += 1;
    }
    out
}

/// Tokenizes a segment into lines. Lexical errors are collected per line;
/// a line with an error yields no tokens.
pub fn lex(text: &str) -> (Vec<Line>, Vec<FlError>) {
    let mut lines = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let vis = visible_chars(raw);
        let mut indent = 0;
        let mut tabs = false;
        let mut spaces = false;
        let mut k = 0;
        while k < vis.len() && (vis[k].0 == ' ' || vis[k].0 == '\t') {
            if vis[k].0 == '\t' {
                tabs = true;
                indent = (indent / TAB_WIDTH + 1) * TAB_WIDTH;
            } else {
                spaces = true;
                indent += 1;
            }
            k += 1;
        }
        let rest = &vis[k..];
        if rest.is_empty() || starts_comment(rest) {
            continue;
        }
        let start = rest[0].1;
        let kind = if rest[0].0 == '@' {
            directive(rest, number)
        } else {
            match tokens(rest, number) {
                Ok(t) => LineKind::Tokens(t),
                Err(e) => {
                    errors.push(e);
                    continue;
                }
            }
        };
        lines.push(Line {
            number,
            indent,
            mixed_indent: tabs && spaces,
            start,
            kind,
        });
    }
    (lines, errors)
}

fn starts_comment(chars: &[(char, usize)]) -> bool {
    chars.len() >= 2 && chars[0].0 == '/' && chars[1].0 == '/'
}

fn directive(chars: &[(char, usize)], line: usize) -> LineKind {
    let cut = (0..chars.len())
        .find(|&i| starts_comment(&chars[i..]))
        .unwrap_or(chars.len());
    let chars = &chars[..cut];
    let mut words: Vec<(String, Span)> = Vec::new();
    let mut cur = String::new();
    let mut col = 0;
    for &(c, column) in chars.iter().chain(std::iter::once(&(' ', 0))) {
        if c.is_whitespace() {
            if !cur.is_empty() {
                let len = cur.chars().count();
                words.push((std::mem::take(&mut cur), Span::new(line, col, len)));
            }
        } else {
            if cur.is_empty() {
                col = column;
            }
            cur.push(c);
        }
    }
    let (name, _) = words.remove(0);
    LineKind::Directive {
        name: name.trim_start_matches('@').to_string(),
        args: words,
    }
}

fn is_word_char(c: char) -> bool {
    is_name_char(c) || c == '#'
}

fn tokens(chars: &[(char, usize)], line: usize) -> Result<Vec<Token>, FlError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (c, col) = chars[i];
        let single = |tok| Token {
            tok,
            span: Span::new(line, col, 1),
        };
        match c {
            ' ' | '\t' | '\r' => i += 1,
            '/' if chars.get(i + 1).is_some_and(|n| n.0 == '/') => break,
            ':' => {
                out.push(single(Tok::Colon));
                i += 1;
            }
            ',' => {
                out.push(single(Tok::Comma));
                i += 1;
            }
            ';' => {
                out.push(single(Tok::Semi));
                i += 1;
            }
            '(' => {
                out.push(single(Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push(single(Tok::RParen));
                i += 1;
            }
            '[' => {
                out.push(single(Tok::LBracket));
                i += 1;
            }
            ']' => {
                out.push(single(Tok::RBracket));
                i += 1;
            }
            '\'' => {
                let mut text = String::new();
                let mut j = i + 1;
                let mut closed = false;
                while j < chars.len() {
                    match chars[j].0 {
                        '\'' => {
                            closed = true;
                            break;
                        }
                        '\\' => {
                            let (e, ecol) = chars.get(j + 1).copied().unwrap_or((' ', chars[j].1));
                            match e {
                                '\\' => text.push('\\'),
                                '\'' => text.push('\''),
                                'n' => text.push('\n'),
                                other => {
                                    return Err(FlError::BadEscape {
                                        c: other,
                                        span: Span::new(line, ecol.saturating_sub(1).max(1), 2),
                                    })
                                }
                            }
                            j += 2;
                        }
                        ch => {
                            text.push(ch);
                            j += 1;
                        }
                    }
                }
                if !closed {
                    return Err(FlError::UnterminatedQuote {
                        span: Span::new(line, col, chars.len() - i),
                    });
                }
                let end = chars[j].1;
                out.push(Token {
                    tok: Tok::Quoted(text),
                    span: Span::new(line, col, end + 1 - col),
                });
                i = j + 1;
            }
            c if is_word_char(c) => {
                let mut word = String::new();
                let mut j = i;
                while j < chars.len() && is_word_char(chars[j].0) {
                    word.push(chars[j].0);
                    j += 1;
                }
                let end = chars[j - 1].1;
                out.push(Token {
                    tok: Tok::Word(word),
                    span: Span::new(line, col, end + 1 - col),
                });
                i = j;
            }
            other => {
                return Err(FlError::UnexpectedChar {
                    c: other,
                    span: Span::new(line, col, 1),
                })
            }
        }
    }
    Ok(out)
}
