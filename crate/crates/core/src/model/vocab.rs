use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const EOS: &str = "</s>";
pub const MASKED: &str = "<MASKED>";
pub const BUG_OPEN: &str = "<BUG>";
pub const BUG_CLOSE: &str = "<BUG/>";
pub const T_CORRECT: &str = "<correct>";
pub const T_INCORRECT: &str = "<incorrect>";

/// Reserved tokens, in id order. Byte-fallback tokens follow them.
pub const RESERVED: [&str; 6] = [EOS, MASKED, BUG_OPEN, BUG_CLOSE, T_CORRECT, T_INCORRECT];

/// Current version of the serialized vocabulary format.
pub const VOCAB_VERSION: u32 = 1;

const BYTE_BASE: usize = RESERVED.len();
const OPERATORS: [&str; 16] = [
    "**=", "//=", "->", "==", "!=", "<=", ">=", "**", "//", "+=", "-=", "*=", "/=", "%=", "<<", ">>",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VocabError {
    #[error("unsupported vocabulary version {0}")]
    Version(u32),
    #[error("reserved token {0:?} must appear exactly once at id {1}")]
    Reserved(String, usize),
    #[error("byte-fallback token <0x{0:02X}> missing or misplaced")]
    ByteFallback(u8),
    #[error("duplicate token {0:?}")]
    Duplicate(String),
}

/// A dense token inventory: reserved tokens, 256 byte-fallback tokens, then
/// corpus pieces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    version: u32,
    tokens: Vec<String>,
}

fn byte_token(b: u8) -> String {
    format!("<0x{b:02X}>")
}

impl Vocabulary {
    /// Vocabulary holding only the reserved and byte-fallback tokens.
    pub fn base() -> Self {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend((0..=255u8).map(byte_token));
        Self::from_tokens_unchecked(tokens)
    }

    /// Builds a vocabulary from the pieces of `texts`. Pieces are ordered by
    /// descending frequency, ties broken lexicographically, so the result
    /// does not depend on input order beyond counts.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts: HashMap<&'a str, usize> = HashMap::new();
        for text in texts {
            for piece in pieces(text) {
                *counts.entry(piece).or_default() += 1;
            }
        }
        let mut base = Self::base();
        let mut extra: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(p, _)| !base.index.contains_key(*p))
            .collect();
        extra.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        for (p, _) in extra {
            base.push(p.to_string());
        }
        base
    }

    /// Validates and adopts an explicit token list, e.g. one received from a
    /// model server.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, VocabError> {
        for (i, r) in RESERVED.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(r) {
                return Err(VocabError::Reserved(r.to_string(), i));
            }
        }
        for b in 0..=255u8 {
            if tokens.get(BYTE_BASE + b as usize) != Some(&byte_token(b)) {
                return Err(VocabError::ByteFallback(b));
            }
        }
        let mut seen = HashMap::new();
        for t in &tokens {
            if seen.insert(t.as_str(), ()).is_some() {
                return Err(VocabError::Duplicate(t.clone()));
            }
        }
        Ok(Self::from_tokens_unchecked(tokens))
    }

    fn from_tokens_unchecked(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, index }
    }

    fn push(&mut self, token: String) {
        self.index.insert(token.clone(), self.tokens.len() as u32);
        self.tokens.push(token);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn eos(&self) -> u32 {
        0
    }

    pub fn masked(&self) -> u32 {
        1
    }

    pub fn bug_open(&self) -> u32 {
        2
    }

    pub fn bug_close(&self) -> u32 {
        3
    }

    pub fn t_correct(&self) -> u32 {
        4
    }

    pub fn t_incorrect(&self) -> u32 {
        5
    }

    /// Splits `text` into pieces and maps each to its id; pieces missing from
    /// the vocabulary fall back to one token per UTF-8 byte.
    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        for piece in pieces(text) {
            match self.index.get(piece) {
                Some(&id) => ids.push(id),
                None => ids.extend(piece.bytes().map(|b| (BYTE_BASE + b as usize) as u32)),
            }
        }
        ids
    }

    /// Concatenates token texts. Runs of byte-fallback tokens are decoded as
    /// UTF-8 (lossily, for runs that are not valid UTF-8).
    pub fn detokenize(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        let mut bytes = Vec::new();
        for &id in ids {
            let id = id as usize;
            if (BYTE_BASE..BYTE_BASE + 256).contains(&id) {
                bytes.push((id - BYTE_BASE) as u8);
                continue;
            }
            if !bytes.is_empty() {
                out.push_str(&String::from_utf8_lossy(&bytes));
                bytes.clear();
            }
            if let Some(t) = self.tokens.get(id) {
                out.push_str(t);
            }
        }
        out.push_str(&String::from_utf8_lossy(&bytes));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&VocabFile {
            version: VOCAB_VERSION,
            tokens: self.tokens.clone(),
        })
        .expect("vocabulary serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let file: VocabFile = serde_json::from_str(json)?;
        if file.version != VOCAB_VERSION {
            return Err(Box::new(VocabError::Version(file.version)));
        }
        Ok(Self::from_tokens(file.tokens)?)
    }
}

/// Splits text into tokenizer pieces whose concatenation is `text`.
///
/// Pieces are DSL lexemes: identifiers, numbers, string literals, comments,
/// operators and single punctuation characters. A newline together with the
/// indentation after it forms one piece. Inline spaces attach to the lexeme
/// that follows them; trailing spaces before a newline form their own piece.
/// Reserved marker tokens are recognized anywhere.
pub fn pieces(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        if bytes[i] == b'\n' {
            i += 1;
            while i < bytes.len() && bytes[i] == b' ' {
                i += 1;
            }
            out.push(&text[start..i]);
            continue;
        }
        while i < bytes.len() && (bytes[i] == b' ' || bytes[i] == b'\t') {
            i += 1;
        }
        if (i == bytes.len() || bytes[i] == b'\n' || bytes[i] == b'\r')
            && i > start {
                out.push(&text[start..i]);
                continue;
            }
        let end = lexeme_end(text, i);
        out.push(&text[start..end]);
        i = end;
    }
    out
}

fn lexeme_end(text: &str, i: usize) -> usize {
    let bytes = text.as_bytes();
    let rest = &text[i..];
    if let Some(r) = RESERVED.iter().find(|r| rest.starts_with(**r)) {
        return i + r.len();
    }
    let c = rest.chars().next().expect("lexeme_end called at end of text");
    let is_word = |c: char| c == '_' || c.is_alphanumeric();
    if c == '#' {
        return i + rest.find('\n').unwrap_or(rest.len());
    }
    if c == '\'' || c == '"' {
        return string_end(text, i);
    }
    if is_word(c) {
        // A string prefix such as f'...' joins the literal.
        let word_end = i + rest.find(|ch: char| !is_word(ch)).unwrap_or(rest.len());
        let word = &text[i..word_end];
        if word_end < bytes.len()
            && (bytes[word_end] == b'\'' || bytes[word_end] == b'"')
            && matches!(word.to_ascii_lowercase().as_str(), "f" | "r" | "b" | "rf" | "fr" | "u")
        {
            return string_end(text, word_end);
        }
        if c.is_ascii_digit() {
            // Keep a fractional part or exponent attached to the number.
            let mut j = word_end;
            if j + 1 < bytes.len() && bytes[j] == b'.' && bytes[j + 1].is_ascii_digit() {
                j += 1;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
            }
            return j;
        }
        return word_end;
    }
    if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) {
        return i + op.len();
    }
    i + c.len_utf8()
}

/// End of a single-line string literal starting with the quote at `q`;
/// unterminated literals run to the end of the line.
fn string_end(text: &str, q: usize) -> usize {
    let bytes = text.as_bytes();
    let quote = bytes[q];
    let mut j = q + 1;
    while j < bytes.len() {
        match bytes[j] {
            b'\\' if j + 1 < bytes.len() && bytes[j + 1] != b'\n' => j += 2,
            b'\n' => return j,
            b if b == quote => return j + 1,
            _ => j += 1,
        }
    }
    bytes.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pieces_follow_dsl_lexemes() {
        let src = "def f(image) -> str:\n    x = ImagePatch(image)\n    return f'{x}' + 'a\\'b'  # c\n";
        assert_eq!(
            pieces(src),
            vec![
                "def", " f", "(", "image", ")", " ->", " str", ":", "\n    ", "x", " =",
                " ImagePatch", "(", "image", ")", "\n    ", "return", " f'{x}'", " +", " 'a\\'b'",
                "  # c", "\n"
            ]
        );
        assert_eq!(pieces("a <BUG>b<BUG/>"), vec!["a", " <BUG>", "b", "<BUG/>"]);
        assert_eq!(pieces("x = 1.5e3 "), vec!["x", " =", " 1.5e3", " "]);
    }

    #[test]
    fn reserved_ids_are_fixed() {
        let v = Vocabulary::build(["return x"]);
        assert_eq!(v.tokenize("<BUG>"), vec![v.bug_open()]);
        assert_eq!(v.tokenize("return"), vec![v.id("return").unwrap()]);
        assert_eq!(v.token(v.eos()), Some(EOS));
        assert_eq!(v.token(v.t_incorrect()), Some(T_INCORRECT));
        assert_eq!(v.len(), 6 + 256 + 2);
    }

    #[test]
    fn unknown_pieces_use_byte_fallback() {
        let v = Vocabulary::base();
        let text = "héllo wörld ✓";
        let ids = v.tokenize(text);
        assert_eq!(ids.len(), text.len());
        assert_eq!(v.detokenize(&ids), text);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let v = Vocabulary::build(["x = 1", "y = 2"]);
        let back = Vocabulary::from_json(&v.to_json()).unwrap();
        assert_eq!(back, v);
        let mut bad = v.tokens().to_vec();
        bad.swap(0, 1);
        assert!(matches!(Vocabulary::from_tokens(bad), Err(VocabError::Reserved(..))));
        let mut dup = v.tokens().to_vec();
        dup.push("x".into());
        assert!(matches!(Vocabulary::from_tokens(dup), Err(VocabError::Duplicate(_))));
    }
}
