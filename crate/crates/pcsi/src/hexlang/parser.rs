//! Recursive-descent parser for Hex: BEGIN blocks and function
//! definitions only, with the Awk expression grammar (assignment,
//! ternary, ||, &&, in, match, relational, concatenation, additive,
//! multiplicative, unary, exponentiation, increment, grouping).

use std::collections::HashMap;
use std::sync::Arc;

use super::ast::*;
use super::lexer::{Lexer, Tok, Token};
use super::CompileError;
use crate::ere::Pattern;

pub struct Parsed {
    pub begin: Vec<Stmt>,
    pub functions: Vec<Function>,
    pub regexes: Vec<Pattern>,
    pub globals: Vec<String>,
}

/// Names of the special variables, pre-interned at fixed global slots.
pub const SPECIAL_VARS: &[&str] = &[
    "FS", "OFS", "ORS", "SUBSEP", "CONVFMT", "OFMT", "RSTART", "RLENGTH", "NR", "NF", "RS",
    "FILENAME",
];

pub fn parse(src: &[u8]) -> Result<Parsed, CompileError> {
    let tokens = Lexer::new(src).tokenize()?;
    let mut function_indices = HashMap::new();
    let mut functions: Vec<Option<Function>> = Vec::new();
    // Pre-scan so calls resolve regardless of definition order.
    for pair in tokens.windows(2) {
        if pair[0].tok == Tok::Function {
            if let Tok::Ident(name) = &pair[1].tok {
                if Builtin::lookup(name).is_some()
                    || matches!(name.as_str(), "split" | "sub" | "gsub" | "match")
                {
                    return Err(CompileError {
                        line: pair[1].line,
                        col: pair[1].col,
                        message: format!("cannot redefine built-in function '{name}'"),
                    });
                }
                if function_indices.insert(name.clone(), functions.len()).is_some() {
                    return Err(CompileError {
                        line: pair[1].line,
                        col: pair[1].col,
                        message: format!("function '{name}' defined twice"),
                    });
                }
                functions.push(None);
            }
        }
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        globals: SPECIAL_VARS.iter().map(|s| s.to_string()).collect(),
        global_indices: SPECIAL_VARS
            .iter()
            .enumerate()
            .map(|(i, s)| (s.to_string(), i))
            .collect(),
        function_indices,
        locals: None,
        regexes: Vec::new(),
        regex_indices: HashMap::new(),
        gt_forbidden: vec![false],
        begin: Vec::new(),
        functions,
    };
    parser.parse_program()?;
    let functions: Vec<Function> = parser
        .functions
        .into_iter()
        .map(|f| f.expect("pre-scanned function missing body"))
        .collect();
    let mut parsed = Parsed {
        begin: parser.begin,
        functions,
        regexes: parser.regexes,
        globals: parser.globals,
    };
    classify_params(&mut parsed)?;
    Ok(parsed)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    globals: Vec<String>,
    global_indices: HashMap<String, usize>,
    function_indices: HashMap<String, usize>,
    /// Param name → local slot while parsing a function body.
    locals: Option<HashMap<String, usize>>,
    regexes: Vec<Pattern>,
    regex_indices: HashMap<Vec<u8>, usize>,
    /// Top entry: is a bare '>' forbidden (print argument context)?
    gt_forbidden: Vec<bool>,
    begin: Vec<Stmt>,
    functions: Vec<Option<Function>>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos.min(self.tokens.len() - 1)].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        &self.tokens[(self.pos + offset).min(self.tokens.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos.min(self.tokens.len() - 1)].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.tokens[self.pos.min(self.tokens.len() - 1)];
        (t.line, t.col)
    }

    fn error(&self, message: impl Into<String>) -> CompileError {
        let (line, col) = self.here();
        CompileError {
            line,
            col,
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), CompileError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}, found {:?}", self.peek())))
        }
    }

    fn skip_newlines(&mut self) {
        while *self.peek() == Tok::Newline {
            self.bump();
        }
    }

    fn skip_terminators(&mut self) {
        while matches!(self.peek(), Tok::Newline | Tok::Semi) {
            self.bump();
        }
    }

    // ---- top level ----

    fn parse_program(&mut self) -> Result<(), CompileError> {
        loop {
            self.skip_terminators();
            match self.peek() {
                Tok::Eof => return Ok(()),
                Tok::Begin => {
                    self.bump();
                    self.skip_newlines();
                    self.expect(Tok::LBrace, "'{' after BEGIN")?;
                    let stmts = self.parse_block_body()?;
                    self.begin.extend(stmts);
                }
                Tok::Function => {
                    self.bump();
                    self.parse_function()?;
                }
                Tok::End | Tok::LBrace => {
                    return Err(self.error(
                        "pattern-action rules are not supported; \
                         only BEGIN blocks and function definitions are allowed",
                    ))
                }
                other => {
                    return Err(self.error(format!(
                        "only BEGIN blocks and function definitions are allowed \
                         at top level, found {other:?}"
                    )))
                }
            }
        }
    }

    fn parse_function(&mut self) -> Result<(), CompileError> {
        let name = match self.bump() {
            Tok::Ident(n) => n,
            other => return Err(self.error(format!("expected function name, found {other:?}"))),
        };
        let index = *self
            .function_indices
            .get(&name)
            .expect("function name pre-scanned");
        self.expect(Tok::LParen, "'(' after function name")?;
        let mut locals = HashMap::new();
        let mut count = 0usize;
        loop {
            self.skip_newlines();
            match self.bump() {
                Tok::RParen => break,
                Tok::Ident(param) => {
                    if locals.insert(param.clone(), count).is_some() {
                        return Err(
                            self.error(format!("duplicate parameter '{param}' in '{name}'"))
                        );
                    }
                    count += 1;
                    self.skip_newlines();
                    match self.peek() {
                        Tok::Comma => {
                            self.bump();
                        }
                        Tok::RParen => {}
                        other => {
                            return Err(self.error(format!(
                                "expected ',' or ')' in parameter list, found {other:?}"
                            )))
                        }
                    }
                }
                other => {
                    return Err(
                        self.error(format!("expected parameter name, found {other:?}"))
                    )
                }
            }
        }
        self.skip_newlines();
        self.expect(Tok::LBrace, "'{' to open function body")?;
        self.locals = Some(locals);
        let body = self.parse_block_body();
        self.locals = None;
        let body = body?;
        self.functions[index] = Some(Function {
            name,
            params: count,
            param_kinds: vec![ParamKind::Unknown; count],
            body,
        });
        Ok(())
    }

    /// Statements up to the closing '}' (consumed).
    fn parse_block_body(&mut self) -> Result<Vec<Stmt>, CompileError> {
        let mut stmts = Vec::new();
        loop {
            self.skip_terminators();
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    return Ok(stmts);
                }
                Tok::Eof => return Err(self.error("unexpected end of input, expected '}'")),
                _ => stmts.push(self.parse_stmt()?),
            }
        }
    }

    // ---- statements ----

    fn parse_stmt(&mut self) -> Result<Stmt, CompileError> {
        match self.peek().clone() {
            Tok::LBrace => {
                self.bump();
                Ok(Stmt::Block(self.parse_block_body()?))
            }
            Tok::If => {
                self.bump();
                self.expect(Tok::LParen, "'(' after if")?;
                let cond = self.parse_paren_expr()?;
                self.skip_newlines();
                let then_branch = Box::new(self.parse_stmt()?);
                let save = self.pos;
                self.skip_terminators();
                if *self.peek() == Tok::Else {
                    self.bump();
                    self.skip_newlines();
                    let else_branch = Box::new(self.parse_stmt()?);
                    Ok(Stmt::If(cond, then_branch, Some(else_branch)))
                } else {
                    self.pos = save;
                    Ok(Stmt::If(cond, then_branch, None))
                }
            }
            Tok::While => {
                self.bump();
                self.expect(Tok::LParen, "'(' after while")?;
                let cond = self.parse_paren_expr()?;
                self.skip_newlines();
                let body = Box::new(self.parse_stmt()?);
                Ok(Stmt::While(cond, body))
            }
            Tok::Do => {
                self.bump();
                self.skip_newlines();
                let body = Box::new(self.parse_stmt()?);
                self.skip_terminators();
                self.expect(Tok::While, "'while' after do body")?;
                self.expect(Tok::LParen, "'(' after while")?;
                let cond = self.parse_paren_expr()?;
                Ok(Stmt::DoWhile(body, cond))
            }
            Tok::For => {
                self.bump();
                self.parse_for()
            }
            Tok::Break => {
                self.bump();
                Ok(Stmt::Break)
            }
            Tok::Continue => {
                self.bump();
                Ok(Stmt::Continue)
            }
            Tok::Return => {
                self.bump();
                if self.locals.is_none() {
                    return Err(self.error("return outside of a function"));
                }
                let value = if self.starts_expression() {
                    Some(self.parse_expr()?)
                } else {
                    None
                };
                Ok(Stmt::Return(value))
            }
            Tok::Exit => {
                self.bump();
                let status = if self.starts_expression() {
                    Some(self.parse_expr()?)
                } else {
                    None
                };
                Ok(Stmt::Exit(status))
            }
            Tok::Delete => {
                self.bump();
                self.parse_delete()
            }
            Tok::Print => {
                self.bump();
                let args = self.parse_output_args()?;
                Ok(Stmt::Print(args))
            }
            Tok::Printf => {
                self.bump();
                let args = self.parse_output_args()?;
                if args.is_empty() {
                    return Err(self.error("printf needs a format argument"));
                }
                Ok(Stmt::Printf(args))
            }
            Tok::Getline => Err(self.error(
                "getline is not available: the input document is only \
                 reachable through the DOM built-ins",
            )),
            Tok::Next => Err(self.error("next is meaningless without a main input loop")),
            Tok::Semi => {
                self.bump();
                Ok(Stmt::Nop)
            }
            _ => Ok(Stmt::Expr(self.parse_expr()?)),
        }
    }

    /// Expression followed by ')'; the '>' restriction does not apply
    /// inside the parentheses.
    fn parse_paren_expr(&mut self) -> Result<Expr, CompileError> {
        self.gt_forbidden.push(false);
        let expr = self.parse_expr();
        self.gt_forbidden.pop();
        let expr = expr?;
        self.expect(Tok::RParen, "')'")?;
        Ok(expr)
    }

    fn parse_for(&mut self) -> Result<Stmt, CompileError> {
        self.expect(Tok::LParen, "'(' after for")?;
        // for (name in array)
        if let (Tok::Ident(var), Tok::In, Tok::Ident(arr), Tok::RParen) = (
            self.peek().clone(),
            self.peek_at(1).clone(),
            self.peek_at(2).clone(),
            self.peek_at(3).clone(),
        ) {
            self.pos += 4;
            self.skip_newlines();
            let body = Box::new(self.parse_stmt()?);
            return Ok(Stmt::ForIn {
                var: self.resolve(&var),
                array: self.resolve(&arr),
                body,
            });
        }
        self.gt_forbidden.push(false);
        let result = (|| {
            let init = if *self.peek() == Tok::Semi {
                None
            } else {
                Some(Box::new(self.parse_simple_stmt()?))
            };
            self.expect(Tok::Semi, "';' in for header")?;
            self.skip_newlines();
            let cond = if *self.peek() == Tok::Semi {
                None
            } else {
                Some(self.parse_expr()?)
            };
            self.expect(Tok::Semi, "';' in for header")?;
            self.skip_newlines();
            let update = if *self.peek() == Tok::RParen {
                None
            } else {
                Some(Box::new(self.parse_simple_stmt()?))
            };
            self.expect(Tok::RParen, "')' closing for header")?;
            Ok((init, cond, update))
        })();
        self.gt_forbidden.pop();
        let (init, cond, update) = result?;
        self.skip_newlines();
        let body = Box::new(self.parse_stmt()?);
        Ok(Stmt::For {
            init,
            cond,
            update,
            body,
        })
    }

    fn parse_simple_stmt(&mut self) -> Result<Stmt, CompileError> {
        if *self.peek() == Tok::Delete {
            self.bump();
            self.parse_delete()
        } else {
            Ok(Stmt::Expr(self.parse_expr()?))
        }
    }

    fn parse_delete(&mut self) -> Result<Stmt, CompileError> {
        let name = match self.bump() {
            Tok::Ident(n) => n,
            other => return Err(self.error(format!("expected array name, found {other:?}"))),
        };
        let array = self.resolve(&name);
        let subscript = if *self.peek() == Tok::LBracket {
            self.bump();
            let subs = self.parse_expr_list(Tok::RBracket)?;
            self.expect(Tok::RBracket, "']'")?;
            subs
        } else {
            Vec::new()
        };
        Ok(Stmt::Delete { array, subscript })
    }

    /// print/printf argument list; bare '>' or '|' afterwards would be
    /// redirection, which Hex rejects.
    fn parse_output_args(&mut self) -> Result<Vec<Expr>, CompileError> {
        let mut args = Vec::new();
        if self.at_statement_end() {
            return Ok(args);
        }
        self.gt_forbidden.push(true);
        let result = (|| {
            loop {
                args.push(self.parse_expr()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                    self.skip_newlines();
                } else {
                    break;
                }
            }
            Ok(())
        })();
        self.gt_forbidden.pop();
        result?;
        if matches!(self.peek(), Tok::Gt | Tok::Pipe) {
            return Err(self.error("output redirection is not supported"));
        }
        Ok(args)
    }

    fn at_statement_end(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Newline | Tok::Semi | Tok::RBrace | Tok::Eof
        )
    }

    fn starts_expression(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Num(_)
                | Tok::Str(_)
                | Tok::Ere(_)
                | Tok::Ident(_)
                | Tok::LParen
                | Tok::Not
                | Tok::Minus
                | Tok::Plus
                | Tok::Incr
                | Tok::Decr
                | Tok::Dollar
        )
    }

    // ---- expressions ----

    fn resolve(&mut self, name: &str) -> VarRef {
        if let Some(locals) = &self.locals {
            if let Some(slot) = locals.get(name) {
                return VarRef::Local(*slot);
            }
        }
        if let Some(idx) = self.global_indices.get(name) {
            return VarRef::Global(*idx);
        }
        let idx = self.globals.len();
        self.globals.push(name.to_string());
        self.global_indices.insert(name.to_string(), idx);
        VarRef::Global(idx)
    }

    fn intern_regex(&mut self, source: &[u8]) -> Result<usize, CompileError> {
        if let Some(idx) = self.regex_indices.get(source) {
            return Ok(*idx);
        }
        let pattern = Pattern::compile(source)
            .map_err(|e| self.error(format!("bad regex literal: {e}")))?;
        let idx = self.regexes.len();
        self.regexes.push(pattern);
        self.regex_indices.insert(source.to_vec(), idx);
        Ok(idx)
    }

    fn to_lvalue(&self, expr: Expr) -> Result<LValue, CompileError> {
        match expr {
            Expr::Var(r) => Ok(LValue::Var(r)),
            Expr::Index(r, subs) => Ok(LValue::Index(r, subs)),
            _ => Err(self.error("assignment target is not a variable or array element")),
        }
    }

    fn parse_expr(&mut self) -> Result<Expr, CompileError> {
        let lhs = self.parse_ternary()?;
        let op = match self.peek() {
            Tok::Assign => None,
            Tok::AddAssign => Some(BinOp::Add),
            Tok::SubAssign => Some(BinOp::Sub),
            Tok::MulAssign => Some(BinOp::Mul),
            Tok::DivAssign => Some(BinOp::Div),
            Tok::ModAssign => Some(BinOp::Mod),
            Tok::PowAssign => Some(BinOp::Pow),
            _ => return Ok(lhs),
        };
        self.bump();
        let target = self.to_lvalue(lhs)?;
        self.skip_newlines();
        let rhs = Box::new(self.parse_expr()?);
        Ok(match op {
            None => Expr::Assign(target, rhs),
            Some(op) => Expr::AugAssign(target, op, rhs),
        })
    }

    fn parse_ternary(&mut self) -> Result<Expr, CompileError> {
        let cond = self.parse_or()?;
        if *self.peek() != Tok::Question {
            return Ok(cond);
        }
        self.bump();
        self.skip_newlines();
        let then_val = self.parse_ternary()?;
        self.expect(Tok::Colon, "':' in conditional expression")?;
        self.skip_newlines();
        let else_val = self.parse_ternary()?;
        Ok(Expr::Ternary(
            Box::new(cond),
            Box::new(then_val),
            Box::new(else_val),
        ))
    }

    fn parse_or(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.parse_and()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            self.skip_newlines();
            let rhs = self.parse_and()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.parse_in()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            self.skip_newlines();
            let rhs = self.parse_in()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_in(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.parse_match()?;
        while *self.peek() == Tok::In {
            self.bump();
            let name = match self.bump() {
                Tok::Ident(n) => n,
                other => {
                    return Err(self.error(format!("expected array name after 'in', found {other:?}")))
                }
            };
            lhs = Expr::In {
                keys: vec![lhs],
                array: self.resolve(&name),
            };
        }
        Ok(lhs)
    }

    fn parse_match(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.parse_rel()?;
        loop {
            let negated = match self.peek() {
                Tok::Tilde => false,
                Tok::NotTilde => true,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.parse_rel()?;
            lhs = Expr::Match {
                negated,
                subject: Box::new(lhs),
                pattern: Box::new(self.pattern_operand(rhs)),
            };
        }
    }

    fn pattern_operand(&self, expr: Expr) -> PatternExpr {
        match expr {
            Expr::Regex(idx) => PatternExpr::Literal(idx),
            other => PatternExpr::Dynamic(other),
        }
    }

    fn parse_rel(&mut self) -> Result<Expr, CompileError> {
        let lhs = self.parse_concat()?;
        let op = match self.peek() {
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt if !*self.gt_forbidden.last().unwrap() => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.parse_concat()?;
        Ok(Expr::Compare(op, Box::new(lhs), Box::new(rhs)))
    }

    fn parse_concat(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.parse_add()?;
        while matches!(
            self.peek(),
            Tok::Num(_)
                | Tok::Str(_)
                | Tok::Ere(_)
                | Tok::Ident(_)
                | Tok::LParen
                | Tok::Incr
                | Tok::Decr
                | Tok::Dollar
        ) {
            let rhs = self.parse_add()?;
            lhs = Expr::Concat(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_add(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.parse_mul()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.parse_mul()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn parse_mul(&mut self) -> Result<Expr, CompileError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.parse_unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, CompileError> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(Expr::Not(Box::new(self.parse_unary()?)))
            }
            Tok::Minus => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.parse_unary()?)))
            }
            Tok::Plus => {
                self.bump();
                Ok(Expr::Pos(Box::new(self.parse_unary()?)))
            }
            _ => self.parse_pow(),
        }
    }

    fn parse_pow(&mut self) -> Result<Expr, CompileError> {
        let lhs = self.parse_postfix()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            // Right-associative, and the exponent may be unary: 2^-1.
            let rhs = self.parse_unary()?;
            Ok(Expr::Binary(BinOp::Pow, Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn parse_postfix(&mut self) -> Result<Expr, CompileError> {
        let mut expr = self.parse_primary()?;
        loop {
            let increment = match self.peek() {
                Tok::Incr => true,
                Tok::Decr => false,
                _ => return Ok(expr),
            };
            self.bump();
            let target = self.to_lvalue(expr)?;
            expr = Expr::IncDec {
                target,
                increment,
                prefix: false,
            };
        }
    }

    fn parse_primary(&mut self) -> Result<Expr, CompileError> {
        match self.bump() {
            Tok::Num(n) => Ok(Expr::Num(n)),
            Tok::Str(s) => Ok(Expr::Str(Arc::new(s))),
            Tok::Ere(source) => Ok(Expr::Regex(self.intern_regex(&source)?)),
            tok @ (Tok::Incr | Tok::Decr) => {
                let increment = tok == Tok::Incr;
                let inner = self.parse_primary()?;
                let target = self.to_lvalue(inner)?;
                Ok(Expr::IncDec {
                    target,
                    increment,
                    prefix: true,
                })
            }
            Tok::LParen => {
                self.gt_forbidden.push(false);
                let first = self.parse_expr();
                let result = (|| {
                    let first = first?;
                    if *self.peek() == Tok::Comma {
                        let mut keys = vec![first];
                        while *self.peek() == Tok::Comma {
                            self.bump();
                            self.skip_newlines();
                            keys.push(self.parse_expr()?);
                        }
                        self.expect(Tok::RParen, "')'")?;
                        self.expect(Tok::In, "'in' after parenthesized subscript list")?;
                        let name = match self.bump() {
                            Tok::Ident(n) => n,
                            other => {
                                return Err(self.error(format!(
                                    "expected array name after 'in', found {other:?}"
                                )))
                            }
                        };
                        Ok(Expr::In {
                            keys,
                            array: self.resolve(&name),
                        })
                    } else {
                        self.expect(Tok::RParen, "')'")?;
                        Ok(first)
                    }
                })();
                self.gt_forbidden.pop();
                result
            }
            Tok::Dollar => Err(self.error(
                "field access ($) is not available: the input is an HTML \
                 document reachable through the DOM built-ins",
            )),
            Tok::Getline => Err(self.error(
                "getline is not available: the input document is only \
                 reachable through the DOM built-ins",
            )),
            Tok::Ident(name) => self.parse_name(name),
            other => Err(self.error(format!("unexpected {other:?} in expression"))),
        }
    }

    fn parse_name(&mut self, name: String) -> Result<Expr, CompileError> {
        let is_local = self
            .locals
            .as_ref()
            .is_some_and(|l| l.contains_key(&name));
        // Locals shadow functions and built-ins inside a body.
        if !is_local {
            if self.function_indices.contains_key(&name) {
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let args = self.parse_call_args()?;
                    let func = self.function_indices[&name];
                    return Ok(Expr::Call { func, args });
                }
                return Err(self.error(format!("function '{name}' used as a variable")));
            }
            match name.as_str() {
                "split" => return self.parse_split(),
                "sub" => return self.parse_subgsub(false),
                "gsub" => return self.parse_subgsub(true),
                "match" => return self.parse_matchfn(),
                _ => {}
            }
            if let Some(builtin) = Builtin::lookup(&name) {
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let args = self.parse_call_args()?;
                    let (min, max) = builtin.arity();
                    if args.len() < min || args.len() > max {
                        return Err(
                            self.error(format!("wrong number of arguments to {name}()"))
                        );
                    }
                    return Ok(Expr::Builtin {
                        which: builtin,
                        args,
                    });
                }
                if builtin == Builtin::Length {
                    return Ok(Expr::BareLength);
                }
                return Err(self.error(format!("built-in '{name}' needs arguments")));
            }
        }
        let var = self.resolve(&name);
        if *self.peek() == Tok::LBracket {
            self.bump();
            self.gt_forbidden.push(false);
            let subs = self.parse_expr_list(Tok::RBracket);
            self.gt_forbidden.pop();
            let subs = subs?;
            self.expect(Tok::RBracket, "']'")?;
            if subs.is_empty() {
                return Err(self.error("empty array subscript"));
            }
            Ok(Expr::Index(var, subs))
        } else {
            Ok(Expr::Var(var))
        }
    }

    fn parse_call_args(&mut self) -> Result<Vec<Expr>, CompileError> {
        self.gt_forbidden.push(false);
        let result = (|| {
            let mut args = Vec::new();
            self.skip_newlines();
            if *self.peek() == Tok::RParen {
                self.bump();
                return Ok(args);
            }
            loop {
                args.push(self.parse_expr()?);
                self.skip_newlines();
                match self.bump() {
                    Tok::Comma => self.skip_newlines(),
                    Tok::RParen => return Ok(args),
                    other => {
                        return Err(self.error(format!(
                            "expected ',' or ')' in argument list, found {other:?}"
                        )))
                    }
                }
            }
        })();
        self.gt_forbidden.pop();
        result
    }

    /// Comma-separated expressions up to (not consuming) `end`.
    fn parse_expr_list(&mut self, end: Tok) -> Result<Vec<Expr>, CompileError> {
        let mut exprs = Vec::new();
        if *self.peek() == end {
            return Ok(exprs);
        }
        loop {
            exprs.push(self.parse_expr()?);
            if *self.peek() == Tok::Comma {
                self.bump();
                self.skip_newlines();
            } else {
                return Ok(exprs);
            }
        }
    }

    fn expect_array_name(&mut self, context: &str) -> Result<VarRef, CompileError> {
        match self.bump() {
            Tok::Ident(n) => {
                if !self
                    .locals
                    .as_ref()
                    .is_some_and(|l| l.contains_key(&n))
                {
                    if self.function_indices.contains_key(&n) || Builtin::lookup(&n).is_some() {
                        return Err(
                            self.error(format!("'{n}' is not usable as an array in {context}"))
                        );
                    }
                }
                Ok(self.resolve(&n))
            }
            other => Err(self.error(format!("expected array name in {context}, found {other:?}"))),
        }
    }

    fn parse_split(&mut self) -> Result<Expr, CompileError> {
        self.expect(Tok::LParen, "'(' after split")?;
        self.gt_forbidden.push(false);
        let result = (|| {
            let string = self.parse_expr()?;
            self.expect(Tok::Comma, "',' after split subject")?;
            self.skip_newlines();
            let array = self.expect_array_name("split")?;
            let separator = if *self.peek() == Tok::Comma {
                self.bump();
                self.skip_newlines();
                let sep = self.parse_expr()?;
                Some(Box::new(self.pattern_operand(sep)))
            } else {
                None
            };
            self.expect(Tok::RParen, "')' closing split")?;
            Ok(Expr::Split {
                string: Box::new(string),
                array,
                separator,
            })
        })();
        self.gt_forbidden.pop();
        result
    }

    fn parse_subgsub(&mut self, global: bool) -> Result<Expr, CompileError> {
        let name = if global { "gsub" } else { "sub" };
        self.expect(Tok::LParen, "'('")?;
        self.gt_forbidden.push(false);
        let result = (|| {
            let pattern = self.parse_expr()?;
            self.expect(Tok::Comma, "',' after pattern")?;
            self.skip_newlines();
            let replacement = self.parse_expr()?;
            if *self.peek() != Tok::Comma {
                return Err(self.error(format!(
                    "{name} needs an explicit target: there is no input record to default to"
                )));
            }
            self.bump();
            self.skip_newlines();
            let target = self.parse_expr()?;
            let target = self.to_lvalue(target)?;
            self.expect(Tok::RParen, "')'")?;
            Ok(Expr::SubGsub {
                global,
                pattern: Box::new(self.pattern_operand(pattern)),
                replacement: Box::new(replacement),
                target,
            })
        })();
        self.gt_forbidden.pop();
        result
    }

    fn parse_matchfn(&mut self) -> Result<Expr, CompileError> {
        self.expect(Tok::LParen, "'(' after match")?;
        self.gt_forbidden.push(false);
        let result = (|| {
            let subject = self.parse_expr()?;
            self.expect(Tok::Comma, "',' after match subject")?;
            self.skip_newlines();
            let pattern = self.parse_expr()?;
            self.expect(Tok::RParen, "')'")?;
            Ok(Expr::MatchFn {
                subject: Box::new(subject),
                pattern: Box::new(self.pattern_operand(pattern)),
            })
        })();
        self.gt_forbidden.pop();
        result
    }
}

// ---- parameter classification ----

#[derive(Debug)]
enum Constraint {
    Direct(usize, usize, ParamKind),
    /// (caller fn, caller slot) gets the kind of (callee fn, callee slot).
    Flows(usize, usize, usize, usize),
}

/// Decide, per function parameter, whether it is used as a scalar or an
/// array, so calls know how to pass arguments. Propagates through call
/// chains to a fixpoint; using one parameter both ways is an error.
fn classify_params(parsed: &mut Parsed) -> Result<(), CompileError> {
    let mut constraints = Vec::new();
    for (fidx, function) in parsed.functions.iter().enumerate() {
        let mut walker = UsageWalker {
            fidx,
            constraints: &mut constraints,
        };
        for stmt in &function.body {
            walker.stmt(stmt);
        }
    }
    // Seed and iterate.
    loop {
        let mut changed = false;
        for c in &constraints {
            let (fidx, slot, kind) = match c {
                Constraint::Direct(f, s, k) => (*f, *s, *k),
                Constraint::Flows(f, s, callee, callee_slot) => {
                    let k = parsed.functions[*callee]
                        .param_kinds
                        .get(*callee_slot)
                        .copied()
                        .unwrap_or(ParamKind::Unknown);
                    (*f, *s, k)
                }
            };
            if kind == ParamKind::Unknown {
                continue;
            }
            let current = &mut parsed.functions[fidx].param_kinds[slot];
            match (*current, kind) {
                (ParamKind::Unknown, k) => {
                    *current = k;
                    changed = true;
                }
                (a, b) if a == b => {}
                _ => {
                    return Err(CompileError {
                        line: 0,
                        col: 0,
                        message: format!(
                            "parameter {} of function '{}' is used as both scalar and array",
                            slot + 1,
                            parsed.functions[fidx].name
                        ),
                    })
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(())
}

struct UsageWalker<'a> {
    fidx: usize,
    constraints: &'a mut Vec<Constraint>,
}

impl UsageWalker<'_> {
    fn local(&mut self, var: &VarRef, kind: ParamKind) {
        if let VarRef::Local(slot) = var {
            self.constraints
                .push(Constraint::Direct(self.fidx, *slot, kind));
        }
    }

    fn lvalue(&mut self, lv: &LValue) {
        match lv {
            LValue::Var(v) => self.local(v, ParamKind::Scalar),
            LValue::Index(v, subs) => {
                self.local(v, ParamKind::Array);
                for s in subs {
                    self.expr(s);
                }
            }
        }
    }

    fn pattern(&mut self, p: &PatternExpr) {
        if let PatternExpr::Dynamic(e) = p {
            self.expr(e);
        }
    }

    fn expr(&mut self, e: &Expr) {
        match e {
            Expr::Num(_) | Expr::Str(_) | Expr::Regex(_) | Expr::BareLength => {}
            Expr::Var(v) => self.local(v, ParamKind::Scalar),
            Expr::Index(v, subs) => {
                self.local(v, ParamKind::Array);
                for s in subs {
                    self.expr(s);
                }
            }
            Expr::Assign(lv, rhs) | Expr::AugAssign(lv, _, rhs) => {
                self.lvalue(lv);
                self.expr(rhs);
            }
            Expr::IncDec { target, .. } => self.lvalue(target),
            Expr::Neg(e) | Expr::Pos(e) | Expr::Not(e) => self.expr(e),
            Expr::Binary(_, a, b)
            | Expr::Compare(_, a, b)
            | Expr::Concat(a, b)
            | Expr::And(a, b)
            | Expr::Or(a, b) => {
                self.expr(a);
                self.expr(b);
            }
            Expr::Ternary(c, t, f) => {
                self.expr(c);
                self.expr(t);
                self.expr(f);
            }
            Expr::Match {
                subject, pattern, ..
            } => {
                self.expr(subject);
                self.pattern(pattern);
            }
            Expr::In { keys, array } => {
                for k in keys {
                    self.expr(k);
                }
                self.local(array, ParamKind::Array);
            }
            Expr::Call { func, args } => {
                for (i, arg) in args.iter().enumerate() {
                    match arg {
                        Expr::Var(v @ VarRef::Local(slot)) => {
                            let _ = v;
                            self.constraints
                                .push(Constraint::Flows(self.fidx, *slot, *func, i));
                        }
                        other => self.expr(other),
                    }
                }
            }
            Expr::Builtin { args, .. } => {
                for a in args {
                    self.expr(a);
                }
            }
            Expr::Split {
                string,
                array,
                separator,
            } => {
                self.expr(string);
                self.local(array, ParamKind::Array);
                if let Some(sep) = separator {
                    self.pattern(sep);
                }
            }
            Expr::SubGsub {
                pattern,
                replacement,
                target,
                ..
            } => {
                self.pattern(pattern);
                self.expr(replacement);
                self.lvalue(target);
            }
            Expr::MatchFn { subject, pattern } => {
                self.expr(subject);
                self.pattern(pattern);
            }
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Expr(e) => self.expr(e),
            Stmt::Print(args) | Stmt::Printf(args) => {
                for a in args {
                    self.expr(a);
                }
            }
            Stmt::Block(body) => {
                for s in body {
                    self.stmt(s);
                }
            }
            Stmt::If(c, t, f) => {
                self.expr(c);
                self.stmt(t);
                if let Some(f) = f {
                    self.stmt(f);
                }
            }
            Stmt::While(c, b) => {
                self.expr(c);
                self.stmt(b);
            }
            Stmt::DoWhile(b, c) => {
                self.stmt(b);
                self.expr(c);
            }
            Stmt::For {
                init,
                cond,
                update,
                body,
            } => {
                if let Some(i) = init {
                    self.stmt(i);
                }
                if let Some(c) = cond {
                    self.expr(c);
                }
                if let Some(u) = update {
                    self.stmt(u);
                }
                self.stmt(body);
            }
            Stmt::ForIn { var, array, body } => {
                self.local(var, ParamKind::Scalar);
                self.local(array, ParamKind::Array);
                self.stmt(body);
            }
            Stmt::Break | Stmt::Continue | Stmt::Nop => {}
            Stmt::Return(e) | Stmt::Exit(e) => {
                if let Some(e) = e {
                    self.expr(e);
                }
            }
            Stmt::Delete { array, subscript } => {
                self.local(array, ParamKind::Array);
                for s in subscript {
                    self.expr(s);
                }
            }
        }
    }
}
