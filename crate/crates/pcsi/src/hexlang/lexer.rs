//! Tokenizer for Hex source. Newlines are significant statement
//! terminators except where Awk's grammar allows continuation (after
//! `{`, `&&`, `||`, `,`, `do`, `else`, `;`, `(`, `?`, `:`); a backslash
//! before a newline always continues the line.

use super::CompileError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Num(f64),
    Str(Vec<u8>),
    /// Raw ERE text between slashes, escapes untouched.
    Ere(Vec<u8>),
    Ident(String),
    // keywords
    Begin,
    End,
    Function,
    If,
    Else,
    While,
    For,
    Do,
    Break,
    Continue,
    Return,
    Exit,
    Delete,
    In,
    Print,
    Printf,
    Getline,
    Next,
    // punctuation and operators
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Newline,
    Comma,
    Assign,
    AddAssign,
    SubAssign,
    MulAssign,
    DivAssign,
    ModAssign,
    PowAssign,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Tilde,
    NotTilde,
    Not,
    AndAnd,
    OrOr,
    Pipe,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Caret,
    Incr,
    Decr,
    Question,
    Colon,
    Dollar,
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

pub struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
    /// Last significant token, for regex-vs-division and newline rules.
    prev: Option<Tok>,
}

impl<'a> Lexer<'a> {
    pub fn new(src: &'a [u8]) -> Lexer<'a> {
        Lexer {
            src,
            pos: 0,
            line: 1,
            col: 1,
            prev: None,
        }
    }

    pub fn tokenize(mut self) -> Result<Vec<Token>, CompileError> {
        let mut out = Vec::new();
        loop {
            let t = self.next_token()?;
            let done = t.tok == Tok::Eof;
            let keep = match &t.tok {
                Tok::Newline => {
                    !matches!(
                        self.prev,
                        None | Some(
                            Tok::LBrace
                                | Tok::AndAnd
                                | Tok::OrOr
                                | Tok::Comma
                                | Tok::Do
                                | Tok::Else
                                | Tok::Semi
                                | Tok::LParen
                                | Tok::Question
                                | Tok::Colon
                                | Tok::Newline
                        )
                    )
                }
                _ => true,
            };
            if keep {
                self.prev = Some(t.tok.clone());
                out.push(t);
            }
            if done {
                break;
            }
        }
        Ok(out)
    }

    fn error(&self, message: impl Into<String>) -> CompileError {
        CompileError {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn next_token(&mut self) -> Result<Token, CompileError> {
        // Skip blanks, comments, and escaped newlines.
        loop {
            match self.peek() {
                Some(b' ') | Some(b'\t') | Some(b'\r') => {
                    self.bump();
                }
                Some(b'\\') if self.peek2() == Some(b'\n') => {
                    self.bump();
                    self.bump();
                }
                Some(b'#') => {
                    while self.peek().is_some_and(|b| b != b'\n') {
                        self.bump();
                    }
                }
                _ => break,
            }
        }
        let line = self.line;
        let col = self.col;
        let make = |tok| Token { tok, line, col };
        let Some(b) = self.peek() else {
            return Ok(make(Tok::Eof));
        };
        let tok = match b {
            b'\n' => {
                self.bump();
                Tok::Newline
            }
            b'{' => self.single(Tok::LBrace),
            b'}' => self.single(Tok::RBrace),
            b'(' => self.single(Tok::LParen),
            b')' => self.single(Tok::RParen),
            b'[' => self.single(Tok::LBracket),
            b']' => self.single(Tok::RBracket),
            b';' => self.single(Tok::Semi),
            b',' => self.single(Tok::Comma),
            b'?' => self.single(Tok::Question),
            b':' => self.single(Tok::Colon),
            b'$' => self.single(Tok::Dollar),
            b'+' => self.op_pair(b'+', Tok::Incr, b'=', Tok::AddAssign, Tok::Plus),
            b'-' => self.op_pair(b'-', Tok::Decr, b'=', Tok::SubAssign, Tok::Minus),
            b'*' => self.op_eq(Tok::MulAssign, Tok::Star),
            b'%' => self.op_eq(Tok::ModAssign, Tok::Percent),
            b'^' => self.op_eq(Tok::PowAssign, Tok::Caret),
            b'=' => self.op_eq(Tok::Eq, Tok::Assign),
            b'!' => {
                self.bump();
                match self.peek() {
                    Some(b'=') => {
                        self.bump();
                        Tok::Ne
                    }
                    Some(b'~') => {
                        self.bump();
                        Tok::NotTilde
                    }
                    _ => Tok::Not,
                }
            }
            b'<' => self.op_eq(Tok::Le, Tok::Lt),
            b'>' => self.op_eq(Tok::Ge, Tok::Gt),
            b'~' => self.single(Tok::Tilde),
            b'&' => {
                self.bump();
                if self.peek() == Some(b'&') {
                    self.bump();
                    Tok::AndAnd
                } else {
                    return Err(self.error("unexpected '&'"));
                }
            }
            b'|' => {
                self.bump();
                if self.peek() == Some(b'|') {
                    self.bump();
                    Tok::OrOr
                } else {
                    Tok::Pipe
                }
            }
            b'"' => self.string_literal()?,
            b'/' => {
                if self.regex_position() {
                    self.regex_literal()?
                } else {
                    self.op_eq(Tok::DivAssign, Tok::Slash)
                }
            }
            b'.' | b'0'..=b'9' => self.number_literal()?,
            b if b.is_ascii_alphabetic() || b == b'_' => self.ident_or_keyword(),
            other => return Err(self.error(format!("unexpected byte {:#04x}", other))),
        };
        Ok(make(tok))
    }

    fn single(&mut self, tok: Tok) -> Tok {
        self.bump();
        tok
    }

    /// `cc` / `c=` / `c` operator triple, e.g. ++ += +.
    fn op_pair(&mut self, double: u8, double_tok: Tok, eq: u8, eq_tok: Tok, plain: Tok) -> Tok {
        self.bump();
        if self.peek() == Some(double) {
            self.bump();
            double_tok
        } else if self.peek() == Some(eq) {
            self.bump();
            eq_tok
        } else {
            plain
        }
    }

    fn op_eq(&mut self, eq_tok: Tok, plain: Tok) -> Tok {
        self.bump();
        if self.peek() == Some(b'=') {
            self.bump();
            eq_tok
        } else {
            plain
        }
    }

    /// Does '/' start a regex here? Yes unless the previous token can
    /// end an expression.
    fn regex_position(&self) -> bool {
        !matches!(
            self.prev,
            Some(
                Tok::Num(_)
                    | Tok::Str(_)
                    | Tok::Ere(_)
                    | Tok::Ident(_)
                    | Tok::RParen
                    | Tok::RBracket
                    | Tok::Incr
                    | Tok::Decr
                    | Tok::Dollar
            )
        )
    }

    fn string_literal(&mut self) -> Result<Tok, CompileError> {
        self.bump(); // opening quote
        let mut out = Vec::new();
        loop {
            match self.bump() {
                None | Some(b'\n') => return Err(self.error("unterminated string literal")),
                Some(b'"') => break,
                Some(b'\\') => {
                    let Some(esc) = self.bump() else {
                        return Err(self.error("unterminated string literal"));
                    };
                    match esc {
                        b'\\' => out.push(b'\\'),
                        b'"' => out.push(b'"'),
                        b'/' => out.push(b'/'),
                        b'a' => out.push(0x07),
                        b'b' => out.push(0x08),
                        b'f' => out.push(0x0c),
                        b'n' => out.push(b'\n'),
                        b'r' => out.push(b'\r'),
                        b't' => out.push(b'\t'),
                        b'v' => out.push(0x0b),
                        b'0'..=b'7' => {
                            let mut value = (esc - b'0') as u32;
                            for _ in 0..2 {
                                match self.peek() {
                                    Some(d @ b'0'..=b'7') => {
                                        value = value * 8 + (d - b'0') as u32;
                                        self.bump();
                                    }
                                    _ => break,
                                }
                            }
                            out.push((value & 0xff) as u8);
                        }
                        b'x' => {
                            let mut value = 0u32;
                            let mut digits = 0;
                            while digits < 2 {
                                match self.peek().and_then(|b| (b as char).to_digit(16)) {
                                    Some(d) => {
                                        value = value * 16 + d;
                                        self.bump();
                                        digits += 1;
                                    }
                                    None => break,
                                }
                            }
                            if digits == 0 {
                                out.push(b'\\');
                                out.push(b'x');
                            } else {
                                out.push((value & 0xff) as u8);
                            }
                        }
                        other => {
                            // Unknown escape: keep both bytes, as the
                            // reference Awk does.
                            out.push(b'\\');
                            out.push(other);
                        }
                    }
                }
                Some(b) => out.push(b),
            }
        }
        Ok(Tok::Str(out))
    }

    fn regex_literal(&mut self) -> Result<Tok, CompileError> {
        self.bump(); // opening slash
        let mut out = Vec::new();
        let mut in_bracket = false;
        loop {
            match self.bump() {
                None | Some(b'\n') => return Err(self.error("unterminated regex literal")),
                Some(b'\\') => {
                    let Some(next) = self.bump() else {
                        return Err(self.error("unterminated regex literal"));
                    };
                    // "\/" means a literal slash; everything else passes
                    // through for the regex compiler.
                    if next == b'/' {
                        out.push(b'/');
                    } else {
                        out.push(b'\\');
                        out.push(next);
                    }
                }
                Some(b'[') if !in_bracket => {
                    in_bracket = true;
                    out.push(b'[');
                }
                Some(b']') if in_bracket => {
                    in_bracket = false;
                    out.push(b']');
                }
                Some(b'/') if !in_bracket => break,
                Some(b) => out.push(b),
            }
        }
        Ok(Tok::Ere(out))
    }

    fn number_literal(&mut self) -> Result<Tok, CompileError> {
        let start = self.pos;
        let mut saw_digit = false;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            saw_digit = true;
            self.bump();
        }
        if self.peek() == Some(b'.') {
            self.bump();
            while self.peek().is_some_and(|b| b.is_ascii_digit()) {
                saw_digit = true;
                self.bump();
            }
        }
        if !saw_digit {
            return Err(self.error("unexpected '.'"));
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            // Consume the exponent only when complete.
            let mark = self.pos;
            self.bump();
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.bump();
            }
            if self.peek().is_some_and(|b| b.is_ascii_digit()) {
                while self.peek().is_some_and(|b| b.is_ascii_digit()) {
                    self.bump();
                }
            } else {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let text = if text.starts_with('.') {
            format!("0{text}")
        } else if text.ends_with('.') {
            format!("{text}0")
        } else {
            text.to_string()
        };
        let value: f64 = text
            .parse()
            .map_err(|_| self.error(format!("bad number literal '{text}'")))?;
        Ok(Tok::Num(value))
    }

    fn ident_or_keyword(&mut self) -> Tok {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|b| b.is_ascii_alphanumeric() || b == b'_')
        {
            self.bump();
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match name {
            "BEGIN" => Tok::Begin,
            "END" => Tok::End,
            "function" | "func" => Tok::Function,
            "if" => Tok::If,
            "else" => Tok::Else,
            "while" => Tok::While,
            "for" => Tok::For,
            "do" => Tok::Do,
            "break" => Tok::Break,
            "continue" => Tok::Continue,
            "return" => Tok::Return,
            "exit" => Tok::Exit,
            "delete" => Tok::Delete,
            "in" => Tok::In,
            "print" => Tok::Print,
            "printf" => Tok::Printf,
            "getline" => Tok::Getline,
            "next" | "nextfile" => Tok::Next,
            _ => Tok::Ident(name.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(src: &str) -> Vec<Tok> {
        Lexer::new(src.as_bytes())
            .tokenize()
            .unwrap()
            .into_iter()
            .map(|t| t.tok)
            .collect()
    }

    #[test]
    fn basic_tokens() {
        assert_eq!(
            lex("BEGIN { print 1+2 }"),
            vec![
                Tok::Begin,
                Tok::LBrace,
                Tok::Print,
                Tok::Num(1.0),
                Tok::Plus,
                Tok::Num(2.0),
                Tok::RBrace,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn regex_vs_division() {
        // After '=', a slash opens a regex.
        assert!(lex("x = /ab/").contains(&Tok::Ere(b"ab".to_vec())));
        // After an identifier, it divides.
        assert!(lex("x = y / 2 / z").contains(&Tok::Slash));
        // Regex with escaped slash and bracketed slash.
        assert!(lex(r"x ~ /a\/b/").contains(&Tok::Ere(b"a/b".to_vec())));
        assert!(lex("x ~ /[/]/").contains(&Tok::Ere(b"[/]".to_vec())));
    }

    #[test]
    fn string_escapes() {
        assert_eq!(
            lex(r#"x = "a\tb\n\377\x41\q""#),
            vec![
                Tok::Ident("x".into()),
                Tok::Assign,
                Tok::Str(b"a\tb\n\xffA\\q".to_vec()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn newline_suppression() {
        let toks = lex("x = 1 &&\n2\ny = 3");
        // Newline after && suppressed; newline before y kept.
        let newlines = toks.iter().filter(|t| **t == Tok::Newline).count();
        assert_eq!(newlines, 1);
        // Leading newlines are dropped entirely.
        assert_eq!(lex("\n\nBEGIN")[0], Tok::Begin);
    }

    #[test]
    fn comments_and_continuation() {
        let toks = lex("x = 1 # a comment\ny = 2");
        assert!(toks.contains(&Tok::Newline));
        let toks = lex("x = 1 + \\\n 2");
        assert!(!toks.contains(&Tok::Newline));
    }

    #[test]
    fn numbers() {
        assert_eq!(lex("1.5e2")[0], Tok::Num(150.0));
        assert_eq!(lex(".5")[0], Tok::Num(0.5));
        assert_eq!(lex("5.")[0], Tok::Num(5.0));
        // Incomplete exponent backs off; 'e' starts an identifier.
        assert_eq!(lex("10e")[..2], [Tok::Num(10.0), Tok::Ident("e".into())]);
    }

    #[test]
    fn operators() {
        assert_eq!(
            lex("a += 1; b ^= 2; c != d; e !~ f; g- -h"),
            vec![
                Tok::Ident("a".into()),
                Tok::AddAssign,
                Tok::Num(1.0),
                Tok::Semi,
                Tok::Ident("b".into()),
                Tok::PowAssign,
                Tok::Num(2.0),
                Tok::Semi,
                Tok::Ident("c".into()),
                Tok::Ne,
                Tok::Ident("d".into()),
                Tok::Semi,
                Tok::Ident("e".into()),
                Tok::NotTilde,
                Tok::Ident("f".into()),
                Tok::Semi,
                Tok::Ident("g".into()),
                Tok::Minus,
                Tok::Minus,
                Tok::Ident("h".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn errors() {
        assert!(Lexer::new(b"\"unterminated").tokenize().is_err());
        assert!(Lexer::new(b"/unterminated").tokenize().is_err());
        assert!(Lexer::new(b"a & b").tokenize().is_err());
        assert!(Lexer::new(b"\xc3\xa9 = 1").tokenize().is_err());
    }
}
