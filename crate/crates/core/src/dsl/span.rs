use serde::{Deserialize, Serialize};

/// A contiguous byte range of program text, with the 1-based lines it touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SourceSpan {
    pub start_byte: usize,
    /// Exclusive.
    pub end_byte: usize,
    pub start_line: usize,
    pub end_line: usize,
}

impl SourceSpan {
    /// Builds a span over `source[start..end]`, computing line numbers.
    ///
    /// Returns `None` when the range is empty, out of bounds, or splits a
    /// UTF-8 code point.
    pub fn from_bytes(source: &str, start: usize, end: usize) -> Option<Self> {
        if start >= end
            || end > source.len()
            || !source.is_char_boundary(start)
            || !source.is_char_boundary(end)
        {
            return None;
        }
        let start_line = line_of(source, start);
        let end_line = start_line + source.as_bytes()[start..end - 1].iter().filter(|&&b| b == b'\n').count();
        Some(SourceSpan {
            start_byte: start,
            end_byte: end,
            start_line,
            end_line,
        })
    }

    pub fn len(&self) -> usize {
        self.end_byte - self.start_byte
    }

    pub fn is_empty(&self) -> bool {
        self.start_byte >= self.end_byte
    }

    /// `true` when `other` lies entirely inside `self`.
    pub fn contains(&self, other: &SourceSpan) -> bool {
        self.start_byte <= other.start_byte && other.end_byte <= self.end_byte
    }

    pub fn overlaps(&self, other: &SourceSpan) -> bool {
        self.start_byte < other.end_byte && other.start_byte < self.end_byte
    }

    /// Checks the span against `source`: in bounds, non-empty, on char
    /// boundaries, and with line numbers that agree with the text.
    pub fn is_valid_in(&self, source: &str) -> bool {
        SourceSpan::from_bytes(source, self.start_byte, self.end_byte).as_ref() == Some(self)
    }

    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.start_byte..self.end_byte]
    }
}

/// 1-based line number of the byte at `offset`.
pub fn line_of(source: &str, offset: usize) -> usize {
    1 + source.as_bytes()[..offset.min(source.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("span {start}..{end} is not valid in a source of {len} bytes")]
pub struct SpanError {
    pub start: usize,
    pub end: usize,
    pub len: usize,
}

/// Replaces the bytes covered by `span` with `replacement`.
///
/// Bytes outside the span are copied unchanged. The span only needs to be a
/// valid byte range here (line numbers are not checked) so callers may splice
/// spans recorded against an equal-prefix sibling program.
pub fn splice(source: &str, span: &SourceSpan, replacement: &str) -> Result<String, SpanError> {
    let err = || SpanError {
        start: span.start_byte,
        end: span.end_byte,
        len: source.len(),
    };
    if span.start_byte > span.end_byte
        || span.end_byte > source.len()
        || !source.is_char_boundary(span.start_byte)
        || !source.is_char_boundary(span.end_byte)
    {
        return Err(err());
    }
    let mut out = String::with_capacity(source.len() - span.len() + replacement.len());
    out.push_str(&source[..span.start_byte]);
    out.push_str(replacement);
    out.push_str(&source[span.end_byte..]);
    Ok(out)
}

/// `true` when `edited` equals `original` everywhere outside `span`, where the
/// span is given in `original` coordinates: the prefix before `span` and the
/// suffix after it are byte-identical.
pub fn differs_only_within(original: &str, edited: &str, span: &SourceSpan) -> bool {
    if span.end_byte > original.len() || span.start_byte > span.end_byte {
        return false;
    }
    let prefix = &original.as_bytes()[..span.start_byte];
    let suffix = &original.as_bytes()[span.end_byte..];
    edited.len() >= prefix.len() + suffix.len()
        && edited.as_bytes().starts_with(prefix)
        && edited.as_bytes().ends_with(suffix)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splice_replaces_only_the_span() {
        let src = "return 'a'";
        let span = SourceSpan::from_bytes(src, 7, 10).unwrap();
        assert_eq!(splice(src, &span, "'b'").unwrap(), "return 'b'");
        assert_eq!(splice(src, &span, "'a'").unwrap(), src);
    }

    #[test]
    fn splice_rejects_out_of_bounds() {
        let span = SourceSpan {
            start_byte: 3,
            end_byte: 40,
            start_line: 1,
            end_line: 1,
        };
        assert!(splice("abc", &span, "x").is_err());
    }

    #[test]
    fn from_bytes_computes_lines() {
        let src = "a\nbc\nd";
        let s = SourceSpan::from_bytes(src, 2, 6).unwrap();
        assert_eq!((s.start_line, s.end_line), (2, 3));
        // A span ending right after a newline stays on the earlier line.
        let s = SourceSpan::from_bytes(src, 0, 2).unwrap();
        assert_eq!((s.start_line, s.end_line), (1, 1));
        assert!(SourceSpan::from_bytes(src, 3, 3).is_none());
        assert!(SourceSpan::from_bytes("é", 0, 1).is_none());
    }

    #[test]
    fn containment_check() {
        let a = "x = 1\ny = 2\n";
        let b = "x = 1\ny = 42\n";
        let span = SourceSpan::from_bytes(a, 10, 11).unwrap();
        assert!(differs_only_within(a, b, &span));
        let whole_line = SourceSpan::from_bytes(a, 6, 11).unwrap();
        assert!(differs_only_within(a, b, &whole_line));
        let first = SourceSpan::from_bytes(a, 0, 5).unwrap();
        assert!(!differs_only_within(a, b, &first));
    }
}
