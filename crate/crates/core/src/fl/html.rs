//! Finds FL segments inside HTML pages.
//!
//! A segment is the body of `<script language="FL">...</script>`; any other
//! text becomes an informal segment. Scripts in other languages are skipped.

use super::ast::{FlDocument, FlSegment, Segment, Span};
use super::lexer::FlError;

/// 1-based line and column of byte offset `at`.
fn position(text: &str, at: usize) -> (usize, usize) {
    let before = &text[..at];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    (line, before[line_start..].chars().count() + 1)
}

fn is_fl_tag(tag: &str) -> bool {
    let squeezed: String = tag.chars().filter(|c| !c.is_whitespace()).collect();
    ["language=\"fl\"", "language='fl'", "language=fl>", "language=fl/"]
        .iter()
        .any(|p| squeezed.contains(p))
        || squeezed.ends_with("language=fl")
}

fn informal(out: &mut Vec<Segment>, text: &str) {
    if !text.trim().is_empty() {
        out.push(Segment::Informal(text.to_string()));
    }
}

pub fn extract_segments(text: &str) -> Result<FlDocument, FlError> {
    // ASCII lowering keeps byte offsets aligned with `text`.
    let lower = text.to_ascii_lowercase();
    let mut segments = Vec::new();
    let mut cursor = 0;
    while let Some(rel) = lower[cursor..].find("<script") {
        let open = cursor + rel;
        let (line, column) = position(text, open);
        let unterminated = || FlError::UnterminatedSegment {
            span: Span::new(line, column, "<script".len()),
        };
        let tag_end = lower[open..].find('>').map(|i| open + i).ok_or_else(unterminated)?;
        let body_start = tag_end + 1;
        let close = lower[body_start..]
            .find("</script")
            .map(|i| body_start + i)
            .ok_or_else(unterminated)?;
        informal(&mut segments, &text[cursor..open]);
        if is_fl_tag(&lower[open..body_start]) {
            let (line, column) = position(text, body_start);
            segments.push(Segment::Fl(FlSegment {
                text: text[body_start..close].to_string(),
                line,
                column,
            }));
        }
        cursor = lower[close..].find('>').map_or(lower.len(), |i| close + i + 1);
    }
    informal(&mut segments, &text[cursor..]);
    Ok(FlDocument { segments })
}

/// Whether `text` looks like an HTML page rather than plain FL.
pub fn looks_like_html(text: &str) -> bool {
    let lower = text.to_ascii_lowercase();
    lower.contains("<script") || lower.contains("<html") || lower.contains("<body")
}

/// An HTML page or a plain FL file.
pub fn document(text: &str) -> Result<FlDocument, FlError> {
    if looks_like_html(text) {
        extract_segments(text)
    } else {
        Ok(FlDocument::from_fl(text))
    }
}
