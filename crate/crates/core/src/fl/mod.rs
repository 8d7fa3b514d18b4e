//! FL, the line-oriented notation for categories and statements.

pub mod ast;
pub mod html;
pub mod lexer;
pub mod lint;
pub mod load;
pub mod parser;
pub mod serialize;

pub use ast::{Block, Directives, FlDescription, FlDocument, FlSegment, Node, Segment, Span, Target, TargetValue};
pub use html::{document, extract_segments};
pub use lexer::{ErrorClass, FlError};
pub use lint::{lint, lint_text, render, LintDiagnostic, Severity};
pub use load::{load_document, load_text, LoadFailure, LoadReport};
pub use parser::{parse, parse_segment, ParseOutput};
pub use serialize::serialize;
