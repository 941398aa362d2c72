use crate::dsl::SourceSpan;
use crate::model::{BUG_CLOSE, BUG_OPEN};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LocError {
    #[error("span {start}..{end} is not a valid non-empty span of the program")]
    InvalidSpan { start: usize, end: usize },
    #[error("program already contains a bug marker")]
    MarkerInProgram,
    #[error("no <BUG>...<BUG/> pair found")]
    Missing,
    #[error("expected exactly one <BUG> and one <BUG/>, found {open} and {close}")]
    Multiple { open: usize, close: usize },
    #[error("<BUG/> appears before <BUG>")]
    Reversed,
    #[error("markers enclose no text")]
    Empty,
}

/// Wraps `loc` in `<BUG>` ... `<BUG/>`; every other byte is unchanged.
pub fn encode_loc(program: &str, loc: &SourceSpan) -> Result<String, LocError> {
    let invalid = || LocError::InvalidSpan {
        start: loc.start_byte,
        end: loc.end_byte,
    };
    if loc.start_byte >= loc.end_byte
        || loc.end_byte > program.len()
        || !program.is_char_boundary(loc.start_byte)
        || !program.is_char_boundary(loc.end_byte)
    {
        return Err(invalid());
    }
    if program.contains(BUG_OPEN) || program.contains(BUG_CLOSE) {
        return Err(LocError::MarkerInProgram);
    }
    let mut out = String::with_capacity(program.len() + BUG_OPEN.len() + BUG_CLOSE.len());
    out.push_str(&program[..loc.start_byte]);
    out.push_str(BUG_OPEN);
    out.push_str(&program[loc.start_byte..loc.end_byte]);
    out.push_str(BUG_CLOSE);
    out.push_str(&program[loc.end_byte..]);
    Ok(out)
}

/// Strips the markers and returns the clean program with the span they
/// delimited.
pub fn decode_loc(marked: &str) -> Result<(String, SourceSpan), LocError> {
    let open = marked.matches(BUG_OPEN).count();
    let close = marked.matches(BUG_CLOSE).count();
    match (open, close) {
        (0, 0) => return Err(LocError::Missing),
        (1, 1) => {}
        _ => return Err(LocError::Multiple { open, close }),
    }
    let o = marked.find(BUG_OPEN).expect("counted above");
    let c = marked.find(BUG_CLOSE).expect("counted above");
    if c < o {
        return Err(LocError::Reversed);
    }
    let inner = &marked[o + BUG_OPEN.len()..c];
    let program = format!("{}{inner}{}", &marked[..o], &marked[c + BUG_CLOSE.len()..]);
    let span = SourceSpan::from_bytes(&program, o, o + inner.len()).ok_or(LocError::Empty)?;
    Ok((program, span))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let p = "def f(image):\n    return 1";
        let loc = SourceSpan::from_bytes(p, 18, 26).unwrap();
        let m = encode_loc(p, &loc).unwrap();
        assert_eq!(m, "def f(image):\n    <BUG>return 1<BUG/>");
        assert_eq!(decode_loc(&m).unwrap(), (p.to_string(), loc));
    }

    #[test]
    fn malformed_markers() {
        assert_eq!(decode_loc("x"), Err(LocError::Missing));
        assert_eq!(decode_loc("<BUG/>x<BUG>"), Err(LocError::Reversed));
        assert!(matches!(decode_loc("<BUG><BUG>x<BUG/><BUG/>"), Err(LocError::Multiple { .. })));
        assert!(matches!(decode_loc("<BUG>x"), Err(LocError::Multiple { .. })));
        assert_eq!(decode_loc("a<BUG><BUG/>b"), Err(LocError::Empty));
        let loc = SourceSpan::from_bytes("abc", 0, 1).unwrap();
        assert_eq!(encode_loc("<BUG>abc", &loc), Err(LocError::MarkerInProgram));
        let bad = SourceSpan { start_byte: 2, end_byte: 9, start_line: 1, end_line: 1 };
        assert!(matches!(encode_loc("abc", &bad), Err(LocError::InvalidSpan { .. })));
    }
}
