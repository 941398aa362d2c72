//! The program DSL: a restricted Python subset with one top-level function.
//!
//! The grammar is documented in `docs/grammar.md`. Anything outside it
//! (classes, imports, `try`, generators, nested functions, ...) is rejected
//! with [`ParseErrorKind::Unsupported`] naming the construct.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod span;
pub mod walk;

use std::fmt;

pub use ast::ProgramAst;
pub use parser::parse;
pub use printer::pretty_print;
pub use span::{differs_only_within, splice, SourceSpan, SpanError};
pub use walk::{enumerate_subtrees, NodeRef, SubtreeRef};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax { expected: Vec<String>, found: String },
    Unsupported { construct: String },
    Lex { message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn syntax(line: usize, col: usize, expected: Vec<String>, found: String) -> Self {
        ParseError {
            line,
            col,
            kind: ParseErrorKind::Syntax { expected, found },
        }
    }

    pub fn unsupported(line: usize, col: usize, construct: &str) -> Self {
        ParseError {
            line,
            col,
            kind: ParseErrorKind::Unsupported {
                construct: construct.to_string(),
            },
        }
    }

    pub fn lex(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            kind: ParseErrorKind::Lex {
                message: message.into(),
            },
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, col {}: ", self.line, self.col)?;
        match &self.kind {
            ParseErrorKind::Syntax { expected, found } => {
                write!(f, "expected {{{}}}, found {found}", expected.join(", "))
            }
            ParseErrorKind::Unsupported { construct } => {
                write!(f, "unsupported construct: {construct}")
            }
            ParseErrorKind::Lex { message } => f.write_str(message),
        }
    }
}

impl std::error::Error for ParseError {}

/// Structural equality: same tree shape and content, spans ignored.
pub fn structurally_equal(a: &ProgramAst, b: &ProgramAst) -> bool {
    walk::without_spans(a) == walk::without_spans(b)
}
