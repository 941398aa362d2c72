//! Indentation-aware lexer for the program DSL.
//!
//! Produces Python-style `Newline`/`Indent`/`Dedent` tokens. Newlines inside
//! brackets are joined, comments and blank lines are dropped.

use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Keyword(&'static str),
    Int(i64),
    Float(f64),
    /// A string literal. `raw` is the full literal text including prefix and
    /// quotes; `body_start` is the byte offset of the first character after
    /// the opening quote.
    Str {
        raw: String,
        value: String,
        fstring: bool,
        body_start: usize,
    },
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub col: usize,
}

impl Token {
    pub fn describe(&self) -> String {
        describe(&self.tok)
    }
}

pub fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Name(n) => format!("identifier '{n}'"),
        Tok::Keyword(k) => format!("'{k}'"),
        Tok::Int(_) | Tok::Float(_) => "number".to_string(),
        Tok::Str { .. } => "string".to_string(),
        Tok::Op(o) => format!("'{o}'"),
        Tok::Newline => "newline".to_string(),
        Tok::Indent => "indent".to_string(),
        Tok::Dedent => "dedent".to_string(),
        Tok::Eof => "end of input".to_string(),
    }
}

pub const KEYWORDS: &[&str] = &[
    "def", "return", "if", "elif", "else", "for", "in", "while", "break", "continue", "pass",
    "and", "or", "not", "is", "lambda", "True", "False", "None",
    // Reserved but rejected by the parser with an unsupported-construct error.
    "class", "import", "from", "try", "except", "finally", "with", "yield", "raise", "global",
    "nonlocal", "del", "assert", "async", "await", "as",
];

const OPS: &[&str] = &[
    "**=", "//=", "->", "**", "//", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", "(",
    ")", "[", "]", "{", "}", ",", ":", ".", ";", "=", "<", ">", "+", "-", "*", "/", "%", "@",
    "&", "|", "^", "~",
];

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    line_start: usize,
    depth: usize,
    indents: Vec<usize>,
    tokens: Vec<Token>,
    at_line_start: bool,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer {
        src,
        pos: 0,
        line: 1,
        line_start: 0,
        depth: 0,
        indents: vec![0],
        tokens: Vec::new(),
        at_line_start: true,
    };
    lx.run()?;
    Ok(lx.tokens)
}

impl<'a> Lexer<'a> {
    fn col(&self, pos: usize) -> usize {
        self.src[self.line_start..pos].chars().count() + 1
    }

    fn err(&self, pos: usize, msg: impl Into<String>) -> ParseError {
        ParseError::lex(self.line, self.col(pos), msg)
    }

    fn push(&mut self, tok: Tok, start: usize, end: usize) {
        let col = self.col(start);
        self.tokens.push(Token {
            tok,
            start,
            end,
            line: self.line,
            col,
        });
    }

    fn peek_byte(&self, off: usize) -> Option<u8> {
        self.src.as_bytes().get(self.pos + off).copied()
    }

    fn newline(&mut self) {
        // self.pos points at '\n'
        self.pos += 1;
        self.line += 1;
        self.line_start = self.pos;
    }

    fn last_is_logical_content(&self) -> bool {
        !matches!(
            self.tokens.last().map(|t| &t.tok),
            None | Some(Tok::Newline) | Some(Tok::Indent) | Some(Tok::Dedent)
        )
    }

    fn run(&mut self) -> Result<(), ParseError> {
        let bytes = self.src.as_bytes();
        loop {
            if self.at_line_start && self.depth == 0 {
                // Measure indentation; skip blank and comment-only lines.
                let mut width = 0;
                let mut p = self.pos;
                while p < bytes.len() && (bytes[p] == b' ' || bytes[p] == b'\t') {
                    if bytes[p] == b'\t' {
                        return Err(self.err(p, "tab indentation is not supported"));
                    }
                    width += 1;
                    p += 1;
                }
                if p >= bytes.len() {
                    self.pos = p;
                    break;
                }
                match bytes[p] {
                    b'\n' => {
                        self.pos = p;
                        self.newline();
                        continue;
                    }
                    b'\r' if bytes.get(p + 1) == Some(&b'\n') => {
                        self.pos = p + 1;
                        self.newline();
                        continue;
                    }
                    b'#' => {
                        while p < bytes.len() && bytes[p] != b'\n' {
                            p += 1;
                        }
                        self.pos = p;
                        continue;
                    }
                    _ => {}
                }
                self.pos = p;
                let current = *self.indents.last().unwrap();
                if width > current {
                    self.indents.push(width);
                    self.push(Tok::Indent, p, p);
                } else if width < current {
                    while width < *self.indents.last().unwrap() {
                        self.indents.pop();
                        self.push(Tok::Dedent, p, p);
                    }
                    if width != *self.indents.last().unwrap() {
                        return Err(self.err(p, "unindent does not match any outer indentation level"));
                    }
                }
                self.at_line_start = false;
            }

            let Some(c) = self.peek_byte(0) else { break };
            match c {
                b' ' | b'\t' | b'\r' => self.pos += 1,
                b'#' => {
                    while self.pos < bytes.len() && bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b'\\' if self.peek_byte(1) == Some(b'\n') => {
                    self.pos += 1;
                    self.newline();
                }
                b'\n' => {
                    if self.depth == 0 {
                        if self.last_is_logical_content() {
                            self.push(Tok::Newline, self.pos, self.pos);
                        }
                        self.at_line_start = true;
                    }
                    self.newline();
                }
                b'0'..=b'9' => self.number()?,
                b'.' if matches!(self.peek_byte(1), Some(b'0'..=b'9')) => self.number()?,
                b'\'' | b'"' => self.string(None)?,
                _ if c == b'_' || c.is_ascii_alphabetic() || c >= 0x80 => {
                    let start = self.pos;
                    if let Some(prefix) = self.string_prefix() {
                        self.pos += prefix;
                        self.string(Some(start))?;
                        continue;
                    }
                    while let Some(ch) = self.src[self.pos..].chars().next() {
                        if ch == '_' || ch.is_alphanumeric() {
                            self.pos += ch.len_utf8();
                        } else {
                            break;
                        }
                    }
                    if self.pos == start {
                        return Err(self.err(start, "unexpected character"));
                    }
                    let word = &self.src[start..self.pos];
                    let tok = match KEYWORDS.iter().find(|k| **k == word) {
                        Some(k) => Tok::Keyword(k),
                        None => Tok::Name(word.to_string()),
                    };
                    self.push(tok, start, self.pos);
                }
                _ => {
                    let start = self.pos;
                    let rest = &self.src[start..];
                    let Some(op) = OPS.iter().find(|o| rest.starts_with(**o)) else {
                        let ch = rest.chars().next().unwrap();
                        return Err(self.err(start, format!("unexpected character {ch:?}")));
                    };
                    match *op {
                        "(" | "[" | "{" => self.depth += 1,
                        ")" | "]" | "}" => self.depth = self.depth.saturating_sub(1),
                        _ => {}
                    }
                    self.pos += op.len();
                    self.push(Tok::Op(op), start, self.pos);
                }
            }
        }
        if self.last_is_logical_content() {
            self.push(Tok::Newline, self.pos, self.pos);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent, self.pos, self.pos);
        }
        self.push(Tok::Eof, self.pos, self.pos);
        Ok(())
    }

    /// Length of an `f`/`r` string prefix at the cursor, if a quote follows.
    fn string_prefix(&self) -> Option<usize> {
        let b = self.src.as_bytes();
        let p = self.pos;
        let is_prefix = |c: u8| matches!(c, b'f' | b'F' | b'r' | b'R');
        let is_quote = |c: Option<&u8>| matches!(c, Some(b'\'') | Some(b'"'));
        if is_prefix(b[p]) && is_quote(b.get(p + 1)) {
            return Some(1);
        }
        if is_prefix(b[p])
            && b.get(p + 1).copied().is_some_and(is_prefix)
            && !b[p].eq_ignore_ascii_case(&b[p + 1])
            && is_quote(b.get(p + 2))
        {
            return Some(2);
        }
        None
    }

    fn number(&mut self) -> Result<(), ParseError> {
        let start = self.pos;
        let b = self.src.as_bytes();
        let mut p = self.pos;
        let mut is_float = false;
        while p < b.len() && b[p].is_ascii_digit() {
            p += 1;
        }
        if p < b.len() && b[p] == b'.' {
            is_float = true;
            p += 1;
            while p < b.len() && b[p].is_ascii_digit() {
                p += 1;
            }
        }
        if p < b.len() && (b[p] == b'e' || b[p] == b'E') {
            let mut q = p + 1;
            if q < b.len() && (b[q] == b'+' || b[q] == b'-') {
                q += 1;
            }
            if q < b.len() && b[q].is_ascii_digit() {
                is_float = true;
                p = q;
                while p < b.len() && b[p].is_ascii_digit() {
                    p += 1;
                }
            }
        }
        if p < b.len() && (b[p] == b'_' || b[p].is_ascii_alphabetic()) {
            return Err(self.err(p, "invalid numeric literal"));
        }
        let text = &self.src[start..p];
        let tok = if is_float {
            Tok::Float(text.parse().map_err(|_| self.err(start, "invalid float literal"))?)
        } else {
            if text.len() > 1 && text.starts_with('0') && text.bytes().any(|c| c != b'0') {
                return Err(self.err(start, "leading zeros in integer literals are not permitted"));
            }
            Tok::Int(text.parse().map_err(|_| self.err(start, "integer literal out of range"))?)
        };
        self.pos = p;
        self.push(tok, start, p);
        Ok(())
    }

    /// Lexes a single-line string literal. `prefix_start` is set when an
    /// `f`/`r` prefix was already consumed.
    fn string(&mut self, prefix_start: Option<usize>) -> Result<(), ParseError> {
        let start = prefix_start.unwrap_or(self.pos);
        let prefix = self.src[start..self.pos].to_ascii_lowercase();
        let fstring = prefix.contains('f');
        let raw_mode = prefix.contains('r');
        let quote = self.src.as_bytes()[self.pos];
        if self.src[self.pos..].starts_with(if quote == b'\'' { "'''" } else { "\"\"\"" }) {
            return Err(ParseError::unsupported(
                self.line,
                self.col(start),
                "triple-quoted string",
            ));
        }
        self.pos += 1;
        let body_start = self.pos;
        let mut value = String::new();
        let mut brace_depth = 0usize;
        loop {
            let Some(ch) = self.src[self.pos..].chars().next() else {
                return Err(self.err(start, "unterminated string literal"));
            };
            match ch {
                '\n' => return Err(self.err(start, "unterminated string literal")),
                '\\' if !raw_mode => {
                    let next = self.src[self.pos + 1..].chars().next();
                    let Some(next) = next else {
                        return Err(self.err(start, "unterminated string literal"));
                    };
                    self.pos += 1 + next.len_utf8();
                    if fstring && brace_depth > 0 {
                        continue;
                    }
                    match next {
                        'n' => value.push('\n'),
                        't' => value.push('\t'),
                        'r' => value.push('\r'),
                        '0' => value.push('\0'),
                        '\\' => value.push('\\'),
                        '\'' => value.push('\''),
                        '"' => value.push('"'),
                        '\n' => return Err(self.err(start, "unterminated string literal")),
                        'x' | 'u' => {
                            let n = if next == 'x' { 2 } else { 4 };
                            let hex = self.src.get(self.pos..self.pos + n).unwrap_or("");
                            let cp = u32::from_str_radix(hex, 16)
                                .ok()
                                .filter(|_| hex.len() == n)
                                .and_then(char::from_u32)
                                .ok_or_else(|| self.err(self.pos, "invalid escape sequence"))?;
                            value.push(cp);
                            self.pos += n;
                        }
                        other => {
                            value.push('\\');
                            value.push(other);
                        }
                    }
                }
                '\\' => {
                    // raw string: keep the backslash and the escaped char
                    let next = self.src[self.pos + 1..].chars().next();
                    match next {
                        Some('\n') | None => {
                            return Err(self.err(start, "unterminated string literal"))
                        }
                        Some(n) => {
                            value.push('\\');
                            value.push(n);
                            self.pos += 1 + n.len_utf8();
                        }
                    }
                }
                '{' if fstring => {
                    if brace_depth == 0 && self.src[self.pos..].starts_with("{{") {
                        value.push_str("{{");
                        self.pos += 2;
                    } else {
                        brace_depth += 1;
                        value.push('{');
                        self.pos += 1;
                    }
                }
                '}' if fstring => {
                    if brace_depth == 0 {
                        if self.src[self.pos..].starts_with("}}") {
                            value.push_str("}}");
                            self.pos += 2;
                        } else {
                            return Err(self.err(self.pos, "single '}' is not allowed in f-string"));
                        }
                    } else {
                        brace_depth -= 1;
                        value.push('}');
                        self.pos += 1;
                    }
                }
                c if c as u32 == quote as u32 && brace_depth == 0 => {
                    self.pos += 1;
                    break;
                }
                c => {
                    value.push(c);
                    self.pos += c.len_utf8();
                }
            }
        }
        let raw = self.src[start..self.pos].to_string();
        self.push(
            Tok::Str {
                raw,
                value,
                fstring,
                body_start,
            },
            start,
            self.pos,
        );
        Ok(())
    }
}
