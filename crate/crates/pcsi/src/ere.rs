//! POSIX extended regular expressions with leftmost-longest matching.
//!
//! This is the single pattern engine behind rule-record URL patterns and
//! the Hex `~`, `match`, `sub`, `gsub`, and `split` operations, so both
//! see identical dialect and semantics. Matching is byte-oriented
//! (C-locale Awk behavior), backed by a Thompson NFA simulated without
//! thread priorities: every accept position is observed, so the longest
//! match at the leftmost start wins, never the first alternative.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatternError {
    #[error("empty pattern group")]
    EmptyGroup,
    #[error("unbalanced '(' in pattern")]
    UnbalancedParen,
    #[error("unterminated bracket expression")]
    UnterminatedBracket,
    #[error("unknown character class [:{0}:]")]
    UnknownClass(String),
    #[error("collating elements [.{0}.] are not supported")]
    CollatingUnsupported(String),
    #[error("repetition bound too large (max {max})")]
    RepeatTooLarge { max: u32 },
    #[error("bad repetition interval")]
    BadInterval,
    #[error("dangling escape at end of pattern")]
    DanglingEscape,
    #[error("quantifier with nothing to repeat")]
    DanglingQuantifier,
}

const MAX_REPEAT: u32 = 1000;

/// 256-bit byte set.
#[derive(Clone, Copy, PartialEq, Eq)]
struct ByteSet([u64; 4]);

impl ByteSet {
    fn empty() -> ByteSet {
        ByteSet([0; 4])
    }

    fn full() -> ByteSet {
        ByteSet([!0; 4])
    }

    fn single(b: u8) -> ByteSet {
        let mut s = ByteSet::empty();
        s.insert(b);
        s
    }

    fn insert(&mut self, b: u8) {
        self.0[(b >> 6) as usize] |= 1u64 << (b & 63);
    }

    fn insert_range(&mut self, lo: u8, hi: u8) {
        for b in lo..=hi {
            self.insert(b);
        }
    }

    fn contains(&self, b: u8) -> bool {
        self.0[(b >> 6) as usize] & (1u64 << (b & 63)) != 0
    }

    fn negate(&mut self) {
        for w in &mut self.0 {
            *w = !*w;
        }
    }
}

impl fmt::Debug for ByteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let listed: Vec<u8> = (0..=255).filter(|b| self.contains(*b)).collect();
        write!(f, "ByteSet({} bytes)", listed.len())
    }
}

#[derive(Debug, Clone)]
enum Ast {
    Empty,
    Bytes(ByteSet),
    StartAnchor,
    EndAnchor,
    Concat(Vec<Ast>),
    Alternate(Vec<Ast>),
    Repeat {
        node: Box<Ast>,
        min: u32,
        max: Option<u32>,
    },
}

// ---- parser ----

struct Parser<'a> {
    pattern: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.pattern.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek();
        if b.is_some() {
            self.pos += 1;
        }
        b
    }

    fn parse_alternation(&mut self) -> Result<Ast, PatternError> {
        let mut branches = vec![self.parse_branch()?];
        while self.peek() == Some(b'|') {
            self.bump();
            branches.push(self.parse_branch()?);
        }
        if branches.len() == 1 {
            Ok(branches.pop().unwrap())
        } else {
            Ok(Ast::Alternate(branches))
        }
    }

    fn parse_branch(&mut self) -> Result<Ast, PatternError> {
        let mut pieces = Vec::new();
        while let Some(b) = self.peek() {
            if b == b'|' || b == b')' {
                break;
            }
            pieces.push(self.parse_piece()?);
        }
        match pieces.len() {
            0 => Ok(Ast::Empty),
            1 => Ok(pieces.pop().unwrap()),
            _ => Ok(Ast::Concat(pieces)),
        }
    }

    fn parse_piece(&mut self) -> Result<Ast, PatternError> {
        let mut atom = self.parse_atom()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.bump();
                    atom = repeat(atom, 0, None)?;
                }
                Some(b'+') => {
                    self.bump();
                    atom = repeat(atom, 1, None)?;
                }
                Some(b'?') => {
                    self.bump();
                    atom = repeat(atom, 0, Some(1))?;
                }
                Some(b'{') => match self.try_parse_interval()? {
                    Some((min, max)) => atom = repeat(atom, min, max)?,
                    None => break,
                },
                _ => break,
            }
        }
        Ok(atom)
    }

    /// `{m}`, `{m,}`, `{m,n}`. A '{' that does not open a valid interval
    /// is taken literally, which is how Awk implementations treat it.
    fn try_parse_interval(&mut self) -> Result<Option<(u32, Option<u32>)>, PatternError> {
        let save = self.pos;
        self.bump(); // '{'
        let mut min_digits = Vec::new();
        while let Some(b) = self.peek().filter(u8::is_ascii_digit) {
            min_digits.push(b);
            self.bump();
        }
        if min_digits.is_empty() {
            self.pos = save;
            return Ok(None);
        }
        let min: u32 = match std::str::from_utf8(&min_digits).unwrap().parse() {
            Ok(v) => v,
            Err(_) => return Err(PatternError::RepeatTooLarge { max: MAX_REPEAT }),
        };
        let result = match self.peek() {
            Some(b'}') => {
                self.bump();
                Some((min, Some(min)))
            }
            Some(b',') => {
                self.bump();
                let mut max_digits = Vec::new();
                while let Some(b) = self.peek().filter(u8::is_ascii_digit) {
                    max_digits.push(b);
                    self.bump();
                }
                match self.peek() {
                    Some(b'}') => {
                        self.bump();
                        if max_digits.is_empty() {
                            Some((min, None))
                        } else {
                            let max: u32 =
                                match std::str::from_utf8(&max_digits).unwrap().parse() {
                                    Ok(v) => v,
                                    Err(_) => {
                                        return Err(PatternError::RepeatTooLarge {
                                            max: MAX_REPEAT,
                                        })
                                    }
                                };
                            if max < min {
                                return Err(PatternError::BadInterval);
                            }
                            Some((min, Some(max)))
                        }
                    }
                    _ => {
                        self.pos = save;
                        None
                    }
                }
            }
            _ => {
                self.pos = save;
                None
            }
        };
        Ok(result)
    }

    fn parse_atom(&mut self) -> Result<Ast, PatternError> {
        match self.bump() {
            None => Ok(Ast::Empty),
            Some(b'(') => {
                let inner = self.parse_alternation()?;
                if self.bump() != Some(b')') {
                    return Err(PatternError::UnbalancedParen);
                }
                Ok(inner)
            }
            Some(b'.') => Ok(Ast::Bytes(ByteSet::full())),
            Some(b'^') => Ok(Ast::StartAnchor),
            Some(b'$') => Ok(Ast::EndAnchor),
            Some(b'[') => self.parse_bracket(),
            Some(b'\\') => {
                let escaped = self.bump().ok_or(PatternError::DanglingEscape)?;
                Ok(Ast::Bytes(ByteSet::single(escape_byte(escaped))))
            }
            Some(b @ (b'*' | b'+' | b'?')) => {
                // A leading quantifier has nothing to repeat.
                let _ = b;
                Err(PatternError::DanglingQuantifier)
            }
            Some(b) => Ok(Ast::Bytes(ByteSet::single(b))),
        }
    }

    fn parse_bracket(&mut self) -> Result<Ast, PatternError> {
        let mut set = ByteSet::empty();
        let negated = if self.peek() == Some(b'^') {
            self.bump();
            true
        } else {
            false
        };
        let mut first = true;
        loop {
            let b = self.bump().ok_or(PatternError::UnterminatedBracket)?;
            match b {
                b']' if !first => break,
                b'[' if matches!(self.peek(), Some(b':')) => {
                    self.bump(); // ':'
                    let mut name = String::new();
                    loop {
                        match self.bump() {
                            None => return Err(PatternError::UnterminatedBracket),
                            Some(b':') if self.peek() == Some(b']') => {
                                self.bump();
                                break;
                            }
                            Some(c) => name.push(c as char),
                        }
                    }
                    add_posix_class(&mut set, &name)?;
                }
                b'[' if matches!(self.peek(), Some(b'.' | b'=')) => {
                    return Err(PatternError::CollatingUnsupported(String::new()));
                }
                _ => {
                    let lo = if b == b'\\' {
                        // Awk regexes process escapes inside brackets.
                        escape_byte(self.bump().ok_or(PatternError::UnterminatedBracket)?)
                    } else {
                        b
                    };
                    if self.peek() == Some(b'-')
                        && self.pattern.get(self.pos + 1).is_some_and(|c| *c != b']')
                    {
                        self.bump(); // '-'
                        let hi_raw = self.bump().ok_or(PatternError::UnterminatedBracket)?;
                        let hi = if hi_raw == b'\\' {
                            escape_byte(self.bump().ok_or(PatternError::UnterminatedBracket)?)
                        } else {
                            hi_raw
                        };
                        if lo <= hi {
                            set.insert_range(lo, hi);
                        } else {
                            return Err(PatternError::BadInterval);
                        }
                    } else {
                        set.insert(lo);
                    }
                }
            }
            first = false;
        }
        if negated {
            set.negate();
        }
        Ok(Ast::Bytes(set))
    }
}

fn escape_byte(b: u8) -> u8 {
    match b {
        b'n' => b'\n',
        b't' => b'\t',
        b'r' => b'\r',
        b'f' => 0x0c,
        b'v' => 0x0b,
        b'a' => 0x07,
        b'b' => 0x08,
        other => other,
    }
}

fn add_posix_class(set: &mut ByteSet, name: &str) -> Result<(), PatternError> {
    let test: fn(u8) -> bool = match name {
        "alpha" => |b| b.is_ascii_alphabetic(),
        "digit" => |b| b.is_ascii_digit(),
        "alnum" => |b| b.is_ascii_alphanumeric(),
        "upper" => |b| b.is_ascii_uppercase(),
        "lower" => |b| b.is_ascii_lowercase(),
        "space" => |b| b.is_ascii_whitespace() || b == 0x0b,
        "blank" => |b| b == b' ' || b == b'\t',
        "punct" => |b| b.is_ascii_punctuation(),
        "print" => |b| (0x20..0x7f).contains(&b),
        "graph" => |b| (0x21..0x7f).contains(&b),
        "cntrl" => |b| b < 0x20 || b == 0x7f,
        "xdigit" => |b| b.is_ascii_hexdigit(),
        other => return Err(PatternError::UnknownClass(other.to_string())),
    };
    for b in 0..=255u8 {
        if test(b) {
            set.insert(b);
        }
    }
    Ok(())
}

fn repeat(node: Ast, min: u32, max: Option<u32>) -> Result<Ast, PatternError> {
    if min > MAX_REPEAT || max.is_some_and(|m| m > MAX_REPEAT) {
        return Err(PatternError::RepeatTooLarge { max: MAX_REPEAT });
    }
    Ok(Ast::Repeat {
        node: Box::new(node),
        min,
        max,
    })
}

// ---- NFA ----

#[derive(Debug, Clone)]
enum State {
    /// Epsilon split to both targets.
    Split(usize, usize),
    /// Consume one byte in the set.
    Bytes(ByteSet, usize),
    /// Match only at position 0.
    AssertStart(usize),
    /// Match only at end of input.
    AssertEnd(usize),
    Accept,
}

/// A compiled pattern.
#[derive(Debug, Clone)]
pub struct Pattern {
    states: Vec<State>,
    start: usize,
    source: Vec<u8>,
}

impl Pattern {
    /// Compile a POSIX ERE from raw bytes.
    pub fn compile(pattern: &[u8]) -> Result<Pattern, PatternError> {
        let mut parser = Parser { pattern, pos: 0 };
        let ast = parser.parse_alternation()?;
        if parser.pos != pattern.len() {
            // Only a stray ')' can stop the parser early.
            return Err(PatternError::UnbalancedParen);
        }
        let mut builder = Builder { states: Vec::new() };
        let accept = builder.push(State::Accept);
        let start = builder.compile(&ast, accept);
        Ok(Pattern {
            states: builder.states,
            start,
            source: pattern.to_vec(),
        })
    }

    pub fn source(&self) -> &[u8] {
        &self.source
    }

    /// True when the pattern matches the entire input.
    pub fn matches_fully(&self, haystack: &[u8]) -> bool {
        self.longest_match_at(haystack, 0) == Some(haystack.len())
    }

    /// True when the pattern matches anywhere in the input.
    pub fn is_match(&self, haystack: &[u8]) -> bool {
        self.find(haystack).is_some()
    }

    /// Leftmost-longest match as a half-open byte range.
    pub fn find(&self, haystack: &[u8]) -> Option<(usize, usize)> {
        self.find_from(haystack, 0)
    }

    /// Leftmost-longest match starting at or after `from`.
    pub fn find_from(&self, haystack: &[u8], from: usize) -> Option<(usize, usize)> {
        for start in from..=haystack.len() {
            if let Some(end) = self.longest_match_at(haystack, start) {
                return Some((start, end));
            }
        }
        None
    }

    /// Longest match anchored at `start`, returning the end offset.
    fn longest_match_at(&self, haystack: &[u8], start: usize) -> Option<usize> {
        let n = self.states.len();
        let mut current: Vec<bool> = vec![false; n];
        let mut next: Vec<bool> = vec![false; n];
        let mut best: Option<usize> = None;

        add_state(&self.states, &mut current, self.start, start, haystack.len());
        let mut pos = start;
        loop {
            if current[accept_index(&self.states)] {
                best = Some(pos);
            }
            if pos >= haystack.len() {
                break;
            }
            let byte = haystack[pos];
            next.iter_mut().for_each(|s| *s = false);
            let mut any = false;
            for (idx, active) in current.iter().enumerate() {
                if !active {
                    continue;
                }
                if let State::Bytes(set, target) = &self.states[idx] {
                    if set.contains(byte) {
                        add_state(&self.states, &mut next, *target, pos + 1, haystack.len());
                        any = true;
                    }
                }
            }
            std::mem::swap(&mut current, &mut next);
            pos += 1;
            if !any {
                break;
            }
        }
        best
    }
}

fn accept_index(states: &[State]) -> usize {
    // The accept state is always pushed first.
    debug_assert!(matches!(states[0], State::Accept));
    0
}

fn add_state(states: &[State], set: &mut [bool], idx: usize, pos: usize, len: usize) {
    if set[idx] {
        return;
    }
    set[idx] = true;
    match &states[idx] {
        State::Split(a, b) => {
            add_state(states, set, *a, pos, len);
            add_state(states, set, *b, pos, len);
        }
        State::AssertStart(t) => {
            if pos == 0 {
                add_state(states, set, *t, pos, len);
            }
        }
        State::AssertEnd(t) => {
            if pos == len {
                add_state(states, set, *t, pos, len);
            }
        }
        State::Bytes(..) | State::Accept => {}
    }
}

struct Builder {
    states: Vec<State>,
}

impl Builder {
    fn push(&mut self, s: State) -> usize {
        self.states.push(s);
        self.states.len() - 1
    }

    /// Compile `ast` so that it continues to `next`; returns the entry state.
    fn compile(&mut self, ast: &Ast, next: usize) -> usize {
        match ast {
            Ast::Empty => next,
            Ast::Bytes(set) => self.push(State::Bytes(*set, next)),
            Ast::StartAnchor => self.push(State::AssertStart(next)),
            Ast::EndAnchor => self.push(State::AssertEnd(next)),
            Ast::Concat(items) => {
                let mut target = next;
                for item in items.iter().rev() {
                    target = self.compile(item, target);
                }
                target
            }
            Ast::Alternate(branches) => {
                let entries: Vec<usize> =
                    branches.iter().map(|b| self.compile(b, next)).collect();
                let mut entry = entries[entries.len() - 1];
                for &e in entries.iter().rev().skip(1) {
                    entry = self.push(State::Split(e, entry));
                }
                entry
            }
            Ast::Repeat { node, min, max } => match max {
                None => {
                    // min..∞: `min` copies then a loop.
                    let loop_idx = self.push(State::Split(0, 0)); // patched below
                    let body = self.compile(node, loop_idx);
                    self.states[loop_idx] = State::Split(body, next);
                    let mut entry = loop_idx;
                    for _ in 0..*min {
                        entry = self.compile(node, entry);
                    }
                    entry
                }
                Some(max) => {
                    // Optional copies after the required ones.
                    let mut entry = next;
                    for _ in *min..*max {
                        let body = self.compile(node, entry);
                        entry = self.push(State::Split(body, next));
                    }
                    for _ in 0..*min {
                        entry = self.compile(node, entry);
                    }
                    entry
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn find(p: &str, hay: &str) -> Option<(usize, usize)> {
        Pattern::compile(p.as_bytes()).unwrap().find(hay.as_bytes())
    }

    #[test]
    fn leftmost_longest_alternation() {
        // A first-match engine would stop after "a".
        assert_eq!(find("a|ab", "xab"), Some((1, 3)));
        assert_eq!(find("a*", "xaaab"), Some((0, 0)));
        assert_eq!(find("aa*", "xaaab"), Some((1, 4)));
    }

    #[test]
    fn full_match_anchoring() {
        let p = Pattern::compile(b"a+").unwrap();
        assert!(p.matches_fully(b"aaa"));
        assert!(!p.matches_fully(b"baaa"));
        assert!(!p.matches_fully(b"aaab"));
        assert!(!p.matches_fully(b""));
    }

    #[test]
    fn rule_pattern_from_bbc_rule() {
        let pattern = br"https?://(www\.)?bbc\.com/news/articles/[0-9a-z][0-9a-z]*";
        assert_eq!(pattern.len(), 57);
        let p = Pattern::compile(pattern).unwrap();
        assert!(p.matches_fully(b"https://www.bbc.com/news/articles/cd0elzk24dno"));
        assert!(p.matches_fully(b"http://bbc.com/news/articles/c1"));
        assert!(!p.matches_fully(b"https://www.bbc.com/sport"));
        assert!(!p.matches_fully(b"https://www.bbc.com/news/articles/CD0ELZK24DNO"));
        assert!(!p.matches_fully(b"https://www.bbc.com/news/articles/cd0elzk24dno?x=1"));
        assert!(!p.matches_fully(b"https://example.com/https://www.bbc.com/news/articles/ab"));
    }

    #[test]
    fn anchors() {
        assert_eq!(find("^ab", "ab"), Some((0, 2)));
        assert_eq!(find("^b", "ab"), None);
        assert_eq!(find("b$", "ab"), Some((1, 2)));
        assert_eq!(find("a$", "ab"), None);
        assert_eq!(find("^$", ""), Some((0, 0)));
        assert_eq!(find("^$", "x"), None);
    }

    #[test]
    fn brackets_and_classes() {
        assert_eq!(find("[a-c]+", "zzabcz"), Some((2, 5)));
        assert_eq!(find("[^a-c]+", "abxy"), Some((2, 4)));
        assert_eq!(find("[]x]", "]"), Some((0, 1)));
        assert_eq!(find("[[:digit:]]+", "ab123"), Some((2, 5)));
        assert_eq!(find("[-a]", "-"), Some((0, 1)));
        assert_eq!(find("[a-]", "-"), Some((0, 1)));
        // Escapes inside brackets, Awk style.
        assert_eq!(find("[\\t]+", "\t\t"), Some((0, 2)));
    }

    #[test]
    fn intervals() {
        let p = Pattern::compile(b"a{2,3}").unwrap();
        assert!(!p.matches_fully(b"a"));
        assert!(p.matches_fully(b"aa"));
        assert!(p.matches_fully(b"aaa"));
        assert!(!p.matches_fully(b"aaaa"));
        assert!(Pattern::compile(b"a{2}").unwrap().matches_fully(b"aa"));
        assert!(Pattern::compile(b"a{2,}").unwrap().matches_fully(b"aaaa"));
        // Literal brace when not an interval.
        assert!(Pattern::compile(b"a{x").unwrap().matches_fully(b"a{x"));
        assert!(Pattern::compile(b"{").unwrap().matches_fully(b"{"));
    }

    #[test]
    fn escapes() {
        assert_eq!(find(r"a\.c", "a.c"), Some((0, 3)));
        assert_eq!(find(r"a\.c", "abc"), None);
        assert_eq!(find(r"\(x\)", "(x)"), Some((0, 3)));
        assert_eq!(find("a\\tb", "a\tb"), Some((0, 3)));
    }

    #[test]
    fn errors() {
        assert!(Pattern::compile(b"(a").is_err());
        assert!(Pattern::compile(b"a)").is_err());
        assert!(Pattern::compile(b"[a").is_err());
        assert!(Pattern::compile(b"*a").is_err());
        assert!(Pattern::compile(b"a\\").is_err());
        assert!(Pattern::compile(b"[[:nope:]]").is_err());
        assert!(Pattern::compile(b"a{3,2}").is_err());
        assert!(Pattern::compile(b"a{9999}").is_err());
    }

    #[test]
    fn empty_pattern_matches_empty_everywhere() {
        assert_eq!(find("", "abc"), Some((0, 0)));
        assert_eq!(find("x|", "abc"), Some((0, 0)));
    }
}
