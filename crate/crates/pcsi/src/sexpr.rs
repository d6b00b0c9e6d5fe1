//! S-expressions in Rivest canonical and display forms.
//!
//! A value is either an atom (an arbitrary byte string) or a list of
//! values. The canonical encoding length-prefixes every atom
//! (`3:abc`) and writes lists as `(...)` with no whitespace; it is the
//! storage, transmission, and hashing format. The display form is the
//! human-facing presentation with bare tokens, quoted strings,
//! `|base64|` atoms, and `<len>:` verbatim atoms.

use sha2::{Digest as _, Sha256};
use std::fmt;

/// Largest accepted atom length prefix. Anything bigger is a parse error.
pub const MAX_ATOM_LEN: usize = (i32::MAX) as usize;

/// An S-expression: a byte-string atom or a list of S-expressions.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Atom(Vec<u8>),
    List(Vec<Value>),
}

impl Value {
    pub fn atom(bytes: impl Into<Vec<u8>>) -> Value {
        Value::Atom(bytes.into())
    }

    pub fn list(items: impl Into<Vec<Value>>) -> Value {
        Value::List(items.into())
    }

    pub fn as_atom(&self) -> Option<&[u8]> {
        match self {
            Value::Atom(b) => Some(b),
            Value::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::Atom(_) => None,
            Value::List(items) => Some(items),
        }
    }

    /// Head atom of a list, e.g. `article` in `(article ...)`.
    pub fn head(&self) -> Option<&[u8]> {
        self.as_list()?.first()?.as_atom()
    }

    /// Canonical encoding: unique bytes for every distinct value.
    pub fn encode_canonical(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_canonical(&mut out);
        out
    }

    fn write_canonical(&self, out: &mut Vec<u8>) {
        match self {
            Value::Atom(bytes) => {
                out.extend_from_slice(bytes.len().to_string().as_bytes());
                out.push(b':');
                out.extend_from_slice(bytes);
            }
            Value::List(items) => {
                out.push(b'(');
                for item in items {
                    item.write_canonical(out);
                }
                out.push(b')');
            }
        }
    }

    /// SHA-256 over the canonical encoding.
    pub fn hash_canonical(&self) -> Digest {
        Digest::of(&self.encode_canonical())
    }

    /// Human-readable rendering; `parse_display` inverts it.
    pub fn render_display(&self) -> String {
        let mut out = String::new();
        self.write_display(&mut out);
        out
    }

    fn write_display(&self, out: &mut String) {
        match self {
            Value::Atom(bytes) => write_display_atom(bytes, out),
            Value::List(items) => {
                out.push('(');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    item.write_display(out);
                }
                out.push(')');
            }
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_display())
    }
}

/// Bare tokens start with a letter and use letters, digits, `-`, `_`.
fn is_token(bytes: &[u8]) -> bool {
    match bytes.first() {
        Some(b) if b.is_ascii_alphabetic() => {}
        _ => return false,
    }
    bytes
        .iter()
        .all(|b| b.is_ascii_alphanumeric() || *b == b'-' || *b == b'_')
}

fn write_display_atom(bytes: &[u8], out: &mut String) {
    if is_token(bytes) {
        out.push_str(std::str::from_utf8(bytes).unwrap());
        return;
    }
    // Quotable: valid UTF-8 made of non-control characters, tab, newline.
    let quotable = std::str::from_utf8(bytes).ok().filter(|s| {
        s.chars()
            .all(|c| c == '\n' || c == '\t' || (!c.is_control() && c != '\u{7f}'))
    });
    match quotable {
        Some(s) if !s.contains('"') && !s.contains('\\') => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    c => out.push(c),
                }
            }
            out.push('"');
        }
        // Printable but full of quotes/backslashes (regex patterns, JSON
        // snippets): verbatim keeps them byte-exact and legible.
        Some(s) => {
            out.push_str(&bytes.len().to_string());
            out.push(':');
            out.push_str(s);
        }
        None => {
            out.push('|');
            out.push_str(&base64_encode(bytes));
            out.push('|');
        }
    }
}

/// A 32-byte content hash. Displays as base64 between `|` pipes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest([u8; 32]);

impl Digest {
    pub fn of(bytes: &[u8]) -> Digest {
        let mut h = Sha256::new();
        h.update(bytes);
        Digest(h.finalize().into())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Digest, SexprError> {
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| SexprError::BadDigestWidth { got: bytes.len() })?;
        Ok(Digest(arr))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Digest, SexprError> {
        let bytes = hex::decode(s).map_err(|_| SexprError::BadDigestText)?;
        Digest::from_bytes(&bytes)
    }

    pub fn to_base64(&self) -> String {
        base64_encode(&self.0)
    }

    pub fn from_base64(s: &str) -> Result<Digest, SexprError> {
        let bytes = base64_decode(s).ok_or(SexprError::BadDigestText)?;
        Digest::from_bytes(&bytes)
    }

    /// Atom carrying the raw digest bytes, as records embed it.
    pub fn to_atom(&self) -> Value {
        Value::Atom(self.0.to_vec())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}|", self.to_base64())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub(crate) fn base64_encode(bytes: &[u8]) -> String {
    use base64::Engine as _;
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub(crate) fn base64_decode(s: &str) -> Option<Vec<u8>> {
    use base64::Engine as _;
    base64::engine::general_purpose::STANDARD.decode(s).ok()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SexprError {
    #[error("offset {offset}: unexpected end of input")]
    UnexpectedEnd { offset: usize },
    #[error("offset {offset}: atom truncated (length {len} exceeds remaining input)")]
    AtomTruncated { offset: usize, len: usize },
    #[error("offset {offset}: expected ':' after length prefix")]
    MissingColon { offset: usize },
    #[error("offset {offset}: atom length too large")]
    LengthTooLarge { offset: usize },
    #[error("offset {offset}: bad length prefix")]
    BadLength { offset: usize },
    #[error("offset {offset}: unbalanced ')'")]
    UnbalancedClose { offset: usize },
    #[error("offset {offset}: unclosed list")]
    UnclosedList { offset: usize },
    #[error("offset {offset}: trailing bytes after value")]
    TrailingBytes { offset: usize },
    #[error("offset {offset}: unexpected byte {byte:#04x}")]
    UnexpectedByte { offset: usize, byte: u8 },
    #[error("offset {offset}: malformed base64 atom")]
    BadBase64 { offset: usize },
    #[error("offset {offset}: unterminated quoted string")]
    UnterminatedQuote { offset: usize },
    #[error("offset {offset}: unknown escape '\\{escape}'")]
    UnknownEscape { offset: usize, escape: char },
    #[error("digest must be 32 bytes, got {got}")]
    BadDigestWidth { got: usize },
    #[error("malformed digest text")]
    BadDigestText,
}

/// Parse exactly one canonical value covering the whole input.
pub fn parse_canonical(input: &[u8]) -> Result<Value, SexprError> {
    let (value, used) = parse_canonical_prefix(input)?;
    if used != input.len() {
        return Err(SexprError::TrailingBytes { offset: used });
    }
    Ok(value)
}

/// Parse one canonical value from the front of `input`, returning it and
/// the number of bytes consumed. This is the greedy entry point used to
/// walk concatenated record streams.
pub fn parse_canonical_prefix(input: &[u8]) -> Result<(Value, usize), SexprError> {
    let mut pos = 0usize;
    let value = parse_canonical_at(input, &mut pos)?;
    Ok((value, pos))
}

fn parse_canonical_at(input: &[u8], pos: &mut usize) -> Result<Value, SexprError> {
    match input.get(*pos) {
        None => Err(SexprError::UnexpectedEnd { offset: *pos }),
        Some(b'(') => {
            let open = *pos;
            *pos += 1;
            let mut items = Vec::new();
            loop {
                match input.get(*pos) {
                    None => return Err(SexprError::UnclosedList { offset: open }),
                    Some(b')') => {
                        *pos += 1;
                        return Ok(Value::List(items));
                    }
                    Some(_) => items.push(parse_canonical_at(input, pos)?),
                }
            }
        }
        Some(b')') => Err(SexprError::UnbalancedClose { offset: *pos }),
        Some(b) if b.is_ascii_digit() => {
            let start = *pos;
            let mut len = 0usize;
            while let Some(d) = input.get(*pos).filter(|b| b.is_ascii_digit()) {
                len = len
                    .checked_mul(10)
                    .and_then(|l| l.checked_add((d - b'0') as usize))
                    .ok_or(SexprError::LengthTooLarge { offset: start })?;
                if len > MAX_ATOM_LEN {
                    return Err(SexprError::LengthTooLarge { offset: start });
                }
                *pos += 1;
            }
            // No leading zeros: "0" alone is fine, "01" is not.
            if input[start] == b'0' && *pos - start > 1 {
                return Err(SexprError::BadLength { offset: start });
            }
            match input.get(*pos) {
                Some(b':') => *pos += 1,
                _ => return Err(SexprError::MissingColon { offset: *pos }),
            }
            if input.len() - *pos < len {
                return Err(SexprError::AtomTruncated { offset: input.len(), len });
            }
            let bytes = input[*pos..*pos + len].to_vec();
            *pos += len;
            Ok(Value::Atom(bytes))
        }
        Some(&byte) => Err(SexprError::UnexpectedByte { offset: *pos, byte }),
    }
}

/// Parse the display form: bare tokens, `"quoted"` strings with
/// `\" \\ \n \t` escapes, `|base64|` atoms, `<len>:` verbatim atoms,
/// and whitespace-separated parenthesized lists.
pub fn parse_display(input: &str) -> Result<Value, SexprError> {
    let bytes = input.as_bytes();
    let mut pos = 0usize;
    skip_ws(bytes, &mut pos);
    let value = parse_display_at(bytes, &mut pos)?;
    skip_ws(bytes, &mut pos);
    if pos != bytes.len() {
        return Err(SexprError::TrailingBytes { offset: pos });
    }
    Ok(value)
}

fn skip_ws(input: &[u8], pos: &mut usize) {
    while input.get(*pos).is_some_and(|b| b.is_ascii_whitespace()) {
        *pos += 1;
    }
}

fn parse_display_at(input: &[u8], pos: &mut usize) -> Result<Value, SexprError> {
    match input.get(*pos) {
        None => Err(SexprError::UnexpectedEnd { offset: *pos }),
        Some(b'(') => {
            let open = *pos;
            *pos += 1;
            let mut items = Vec::new();
            loop {
                skip_ws(input, pos);
                match input.get(*pos) {
                    None => return Err(SexprError::UnclosedList { offset: open }),
                    Some(b')') => {
                        *pos += 1;
                        return Ok(Value::List(items));
                    }
                    Some(_) => items.push(parse_display_at(input, pos)?),
                }
            }
        }
        Some(b')') => Err(SexprError::UnbalancedClose { offset: *pos }),
        Some(b'|') => {
            let open = *pos;
            *pos += 1;
            let start = *pos;
            while input.get(*pos).is_some_and(|b| *b != b'|') {
                *pos += 1;
            }
            if input.get(*pos) != Some(&b'|') {
                return Err(SexprError::BadBase64 { offset: open });
            }
            let inner: String = std::str::from_utf8(&input[start..*pos])
                .map_err(|_| SexprError::BadBase64 { offset: open })?
                .chars()
                .filter(|c| !c.is_ascii_whitespace())
                .collect();
            *pos += 1;
            let bytes = base64_decode(&inner).ok_or(SexprError::BadBase64 { offset: open })?;
            Ok(Value::Atom(bytes))
        }
        Some(b'"') => {
            let open = *pos;
            *pos += 1;
            let mut out = Vec::new();
            loop {
                match input.get(*pos) {
                    None => return Err(SexprError::UnterminatedQuote { offset: open }),
                    Some(b'"') => {
                        *pos += 1;
                        return Ok(Value::Atom(out));
                    }
                    Some(b'\\') => {
                        *pos += 1;
                        match input.get(*pos) {
                            Some(b'"') => out.push(b'"'),
                            Some(b'\\') => out.push(b'\\'),
                            Some(b'n') => out.push(b'\n'),
                            Some(b't') => out.push(b'\t'),
                            Some(&c) => {
                                return Err(SexprError::UnknownEscape {
                                    offset: *pos,
                                    escape: c as char,
                                })
                            }
                            None => {
                                return Err(SexprError::UnterminatedQuote { offset: open })
                            }
                        }
                        *pos += 1;
                    }
                    Some(&b) => {
                        out.push(b);
                        *pos += 1;
                    }
                }
            }
        }
        Some(b) if b.is_ascii_digit() => {
            // Verbatim atom, same shape as the canonical encoding.
            parse_canonical_at(input, pos)
        }
        Some(_) => {
            let start = *pos;
            while input
                .get(*pos)
                .is_some_and(|b| !b.is_ascii_whitespace() && !b"()|\"".contains(b))
            {
                *pos += 1;
            }
            if *pos == start {
                return Err(SexprError::UnexpectedByte {
                    offset: start,
                    byte: input[start],
                });
            }
            Ok(Value::Atom(input[start..*pos].to_vec()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(s: &str) -> Value {
        Value::atom(s.as_bytes().to_vec())
    }

    #[test]
    fn canonical_atoms_and_lists() {
        assert_eq!(atom("abc").encode_canonical(), b"3:abc");
        assert_eq!(Value::list(vec![]).encode_canonical(), b"()");
        assert_eq!(atom("").encode_canonical(), b"0:");
        assert_eq!(
            Value::list(vec![atom("article")]).encode_canonical(),
            b"(7:article)"
        );
    }

    #[test]
    fn canonical_article_prefix_matches_published_form() {
        let object = Value::list(vec![
            atom("article"),
            Value::list(vec![
                atom("headline"),
                atom("BBC complains to Apple over misleading shooting headline"),
            ]),
            Value::list(vec![atom("date"), atom("1734112342")]),
            Value::list(vec![atom("author"), atom("Graham Fraser")]),
            Value::list(vec![atom("body"), atom("...")]),
        ]);
        let encoded = object.encode_canonical();
        let expected_prefix = b"(7:article(8:headline56:BBC complains to Apple over misleading \
shooting headline)(4:date10:1734112342)(6:author13:Graham Fraser)(4:body";
        assert!(encoded.starts_with(expected_prefix));
    }

    #[test]
    fn parse_canonical_round_trips() {
        let v = parse_canonical(b"3:abc").unwrap();
        assert_eq!(v, atom("abc"));
        let v = parse_canonical(b"(7:article)").unwrap();
        assert_eq!(v, Value::list(vec![atom("article")]));
        let v = parse_canonical(b"(4:date10:1734112342)").unwrap();
        assert_eq!(v, Value::list(vec![atom("date"), atom("1734112342")]));
    }

    #[test]
    fn parse_canonical_errors_carry_offsets() {
        match parse_canonical(b"3:ab") {
            Err(SexprError::AtomTruncated { offset, len }) => {
                assert_eq!((offset, len), (4, 3));
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
        assert!(matches!(
            parse_canonical(b"3:abcX"),
            Err(SexprError::TrailingBytes { offset: 5 })
        ));
        assert!(matches!(
            parse_canonical(b"3abc"),
            Err(SexprError::MissingColon { offset: 1 })
        ));
        assert!(matches!(
            parse_canonical(b"(3:abc"),
            Err(SexprError::UnclosedList { offset: 0 })
        ));
        assert!(matches!(
            parse_canonical(b")"),
            Err(SexprError::UnbalancedClose { offset: 0 })
        ));
        assert!(matches!(
            parse_canonical(b"03:abc"),
            Err(SexprError::BadLength { offset: 0 })
        ));
    }

    #[test]
    fn greedy_parse_reports_consumed_length() {
        let (v, used) = parse_canonical_prefix(b"3:abc(1:x)").unwrap();
        assert_eq!(v, atom("abc"));
        assert_eq!(used, 5);
    }

    #[test]
    fn display_rendering() {
        assert_eq!(atom("article").render_display(), "article");
        assert_eq!(atom("Graham Fraser").render_display(), "\"Graham Fraser\"");
        assert_eq!(atom("1735608269").render_display(), "\"1735608269\"");
        let digest = Digest::from_base64("CY7Iwrrw5i7MyjV7Zqdwf2Tj0Hb3iCsJF4Sv6jcrUyw=").unwrap();
        assert_eq!(
            digest.to_atom().render_display(),
            "|CY7Iwrrw5i7MyjV7Zqdwf2Tj0Hb3iCsJF4Sv6jcrUyw=|"
        );
        let pattern = r"https?://(www\.)?bbc\.com/news/articles/[0-9a-z][0-9a-z]*";
        assert_eq!(
            atom(pattern).render_display(),
            format!("{}:{}", pattern.len(), pattern)
        );
    }

    #[test]
    fn display_parsing() {
        assert_eq!(
            parse_display("(date \"1734112342\")").unwrap(),
            Value::list(vec![atom("date"), atom("1734112342")])
        );
        assert_eq!(
            parse_display("(4:date10:1734112342)").unwrap(),
            Value::list(vec![atom("date"), atom("1734112342")])
        );
        assert_eq!(parse_display("|AAAA|").unwrap(), Value::Atom(vec![0, 0, 0]));
        assert_eq!(
            parse_display("( a\n  \"b c\"\t(d) )").unwrap(),
            Value::list(vec![
                atom("a"),
                atom("b c"),
                Value::list(vec![atom("d")])
            ])
        );
    }

    #[test]
    fn display_parse_errors() {
        assert!(matches!(
            parse_display("|no!b64|"),
            Err(SexprError::BadBase64 { .. })
        ));
        assert!(matches!(
            parse_display("\"unterminated"),
            Err(SexprError::UnterminatedQuote { .. })
        ));
        assert!(matches!(
            parse_display("5:abc"),
            Err(SexprError::AtomTruncated { .. })
        ));
        assert!(matches!(
            parse_display("\"bad \\q escape\""),
            Err(SexprError::UnknownEscape { .. })
        ));
    }

    #[test]
    fn hash_of_abc_atom_is_sha256_of_canonical_bytes() {
        // Independently: sha256 of the 5 bytes "3:abc".
        let d = atom("abc").hash_canonical();
        assert_eq!(d, Digest::of(b"3:abc"));
        assert_eq!(
            d.to_hex(),
            Digest::of(b"3:abc").to_hex(),
        );
        // Equal values hash identically.
        assert_eq!(atom("abc").hash_canonical(), atom("abc").hash_canonical());
        assert_ne!(atom("abc").hash_canonical(), atom("abd").hash_canonical());
    }

    #[test]
    fn digest_text_forms() {
        let d = Digest::of(b"x");
        let b64 = d.to_base64();
        assert_eq!(Digest::from_base64(&b64).unwrap(), d);
        assert_eq!(Digest::from_hex(&d.to_hex()).unwrap(), d);
        assert_eq!(b64.len(), 44);
        assert!(Digest::from_base64("AAAA").is_err());
        assert!(Digest::from_bytes(&[0u8; 31]).is_err());
    }
}
