//! Tree-walking evaluator. Each execution owns its interpreter state;
//! the program and document tree are shared read-only.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;
use std::time::Instant;

use super::ast::*;
use super::parser::SPECIAL_VARS;
use super::sprintf;
use super::value::{num_to_bytes, to_i32_clamped, Scalar};
use super::{HexProgram, Limits};
use crate::cssselect::{parse_selector, Selector};
use crate::ere::Pattern;
use crate::htmldom::{Axis, DomTree};

pub type AwkArray = BTreeMap<Vec<u8>, Scalar>;
pub type ArrayRef = Rc<RefCell<AwkArray>>;

#[derive(Debug, Clone)]
pub enum Var {
    Untyped,
    Scalar(Scalar),
    Array(ArrayRef),
}

/// Non-local exits: runtime errors (including resource limits) and
/// `exit`.
pub enum Abort {
    Error(String),
    Exit(i32),
}

type EResult<T> = Result<T, Abort>;

enum Flow {
    Normal,
    Break,
    Continue,
    Return(Scalar),
}

enum SplitMode {
    /// FS " ": split on space/tab/newline runs, trimming both ends.
    Whitespace,
    /// Single-byte FS taken literally, "." included.
    Byte(u8),
    /// Empty FS: one field per byte.
    Chars,
    Regex(Rc<Pattern>),
}

const FS: usize = 0;
const OFS: usize = 1;
const ORS: usize = 2;
const SUBSEP: usize = 3;
const CONVFMT: usize = 4;
const OFMT: usize = 5;
const RSTART: usize = 6;
const RLENGTH: usize = 7;
const NR: usize = 8;
const NF: usize = 9;
const RS: usize = 10;

pub struct Interp<'p> {
    program: &'p HexProgram,
    tree: &'p DomTree,
    limits: &'p Limits,
    globals: Vec<Var>,
    pub stdout: Vec<u8>,
    pub diagnostics: Vec<String>,
    steps: u64,
    started: Instant,
    depth: usize,
    literal_patterns: Vec<Option<Rc<Pattern>>>,
    dynamic_patterns: HashMap<Vec<u8>, Rc<Pattern>>,
    selectors: HashMap<Vec<u8>, Option<Rc<Selector>>>,
}

impl<'p> Interp<'p> {
    pub fn new(program: &'p HexProgram, tree: &'p DomTree, limits: &'p Limits) -> Interp<'p> {
        debug_assert_eq!(SPECIAL_VARS[CONVFMT], "CONVFMT");
        debug_assert_eq!(SPECIAL_VARS[RS], "RS");
        let mut globals = vec![Var::Untyped; program.globals.len()];
        globals[FS] = Var::Scalar(Scalar::str(" "));
        globals[OFS] = Var::Scalar(Scalar::str(" "));
        globals[ORS] = Var::Scalar(Scalar::str("\n"));
        globals[SUBSEP] = Var::Scalar(Scalar::str([0x1c]));
        globals[CONVFMT] = Var::Scalar(Scalar::str("%.6g"));
        globals[OFMT] = Var::Scalar(Scalar::str("%.6g"));
        globals[NR] = Var::Scalar(Scalar::Num(0.0));
        globals[NF] = Var::Scalar(Scalar::Num(0.0));
        globals[RS] = Var::Scalar(Scalar::str("\n"));
        Interp {
            program,
            tree,
            limits,
            globals,
            stdout: Vec::new(),
            diagnostics: Vec::new(),
            steps: 0,
            started: Instant::now(),
            depth: 0,
            literal_patterns: vec![None; program.regexes.len()],
            dynamic_patterns: HashMap::new(),
            selectors: HashMap::new(),
        }
    }

    pub fn run_begin(&mut self) -> EResult<()> {
        let mut locals = Vec::new();
        for stmt in &self.program.begin {
            match self.exec(stmt, &mut locals)? {
                Flow::Normal => {}
                Flow::Break | Flow::Continue => {
                    return Err(Abort::Error("break/continue outside a loop".into()))
                }
                Flow::Return(_) => unreachable!("parser rejects return outside functions"),
            }
        }
        Ok(())
    }

    fn err(&self, message: impl Into<String>) -> Abort {
        Abort::Error(message.into())
    }

    fn tick(&mut self) -> EResult<()> {
        self.steps += 1;
        if self.steps > self.limits.max_steps {
            return Err(self.err("resource limit: steps"));
        }
        if self.steps % 4096 == 0
            && self.started.elapsed().as_secs_f64() > self.limits.cpu_seconds
        {
            return Err(self.err("resource limit: cpu"));
        }
        Ok(())
    }

    // ---- variable access ----

    fn convfmt(&self) -> Vec<u8> {
        match &self.globals[CONVFMT] {
            Var::Scalar(Scalar::Str(b) | Scalar::StrNum(b, _)) => b.as_ref().clone(),
            Var::Scalar(Scalar::Num(n)) => num_to_bytes(*n, b"%.6g"),
            _ => b"%.6g".to_vec(),
        }
    }

    fn special_bytes(&self, idx: usize) -> Vec<u8> {
        match &self.globals[idx] {
            Var::Scalar(s) => s.to_bytes(&self.convfmt()).as_ref().clone(),
            _ => Vec::new(),
        }
    }

    fn peek_var<'a>(&'a self, var: VarRef, locals: &'a [Var]) -> &'a Var {
        match var {
            VarRef::Global(idx) => &self.globals[idx],
            VarRef::Local(slot) => &locals[slot],
        }
    }

    fn get_scalar(&mut self, var: VarRef, locals: &mut Vec<Var>) -> EResult<Scalar> {
        let value = match self.peek_var(var, locals) {
            Var::Untyped => Scalar::Uninit,
            Var::Scalar(s) => s.clone(),
            Var::Array(_) => {
                return Err(self.err(format!(
                    "array '{}' used in scalar context",
                    self.var_name(var)
                )))
            }
        };
        Ok(value)
    }

    fn set_scalar(&mut self, var: VarRef, value: Scalar, locals: &mut Vec<Var>) -> EResult<()> {
        if matches!(self.peek_var(var, locals), Var::Array(_)) {
            return Err(self.err(format!(
                "array '{}' used in scalar context",
                self.var_name(var)
            )));
        }
        let slot = match var {
            VarRef::Global(idx) => &mut self.globals[idx],
            VarRef::Local(slot) => &mut locals[slot],
        };
        *slot = Var::Scalar(value);
        Ok(())
    }

    fn get_array(&mut self, var: VarRef, locals: &mut Vec<Var>) -> EResult<ArrayRef> {
        if matches!(self.peek_var(var, locals), Var::Scalar(_)) {
            return Err(self.err(format!(
                "scalar '{}' used as an array",
                self.var_name(var)
            )));
        }
        let slot = match var {
            VarRef::Global(idx) => &mut self.globals[idx],
            VarRef::Local(slot) => &mut locals[slot],
        };
        if let Var::Array(a) = slot {
            return Ok(Rc::clone(a));
        }
        let arr: ArrayRef = Rc::new(RefCell::new(BTreeMap::new()));
        *slot = Var::Array(Rc::clone(&arr));
        Ok(arr)
    }

    fn var_name(&self, var: VarRef) -> String {
        match var {
            VarRef::Global(idx) => self.program.globals[idx].clone(),
            VarRef::Local(slot) => format!("(local {slot})"),
        }
    }

    fn subscript(&mut self, exprs: &[Expr], locals: &mut Vec<Var>) -> EResult<Vec<u8>> {
        let convfmt = self.convfmt();
        let subsep = self.special_bytes(SUBSEP);
        let mut key = Vec::new();
        for (i, e) in exprs.iter().enumerate() {
            if i > 0 {
                key.extend_from_slice(&subsep);
            }
            let v = self.eval(e, locals)?;
            key.extend_from_slice(&v.to_bytes(&convfmt));
        }
        Ok(key)
    }

    fn read_lvalue(&mut self, lv: &LValue, locals: &mut Vec<Var>) -> EResult<Scalar> {
        match lv {
            LValue::Var(var) => self.get_scalar(*var, locals),
            LValue::Index(var, subs) => {
                let key = self.subscript(subs, locals)?;
                let arr = self.get_array(*var, locals)?;
                let mut map = arr.borrow_mut();
                Ok(map.entry(key).or_insert(Scalar::Uninit).clone())
            }
        }
    }

    fn write_lvalue(&mut self, lv: &LValue, value: Scalar, locals: &mut Vec<Var>) -> EResult<()> {
        match lv {
            LValue::Var(var) => self.set_scalar(*var, value, locals),
            LValue::Index(var, subs) => {
                let key = self.subscript(subs, locals)?;
                let arr = self.get_array(*var, locals)?;
                arr.borrow_mut().insert(key, value);
                Ok(())
            }
        }
    }

    // ---- patterns and selectors ----

    fn pattern(&mut self, p: &PatternExpr, locals: &mut Vec<Var>) -> EResult<Rc<Pattern>> {
        match p {
            PatternExpr::Literal(idx) => {
                if self.literal_patterns[*idx].is_none() {
                    self.literal_patterns[*idx] =
                        Some(Rc::new(self.program.regexes[*idx].clone()));
                }
                Ok(Rc::clone(self.literal_patterns[*idx].as_ref().unwrap()))
            }
            PatternExpr::Dynamic(expr) => {
                let convfmt = self.convfmt();
                let bytes = self.eval(expr, locals)?.to_bytes(&convfmt);
                if let Some(p) = self.dynamic_patterns.get(bytes.as_ref()) {
                    return Ok(Rc::clone(p));
                }
                let compiled = Pattern::compile(&bytes).map_err(|e| {
                    self.err(format!(
                        "bad regular expression '{}': {e}",
                        String::from_utf8_lossy(&bytes)
                    ))
                })?;
                let rc = Rc::new(compiled);
                self.dynamic_patterns
                    .insert(bytes.as_ref().clone(), Rc::clone(&rc));
                Ok(rc)
            }
        }
    }

    fn selector(&mut self, source: &[u8]) -> Option<Rc<Selector>> {
        if let Some(cached) = self.selectors.get(source) {
            return cached.clone();
        }
        let text = String::from_utf8_lossy(source).into_owned();
        let parsed = match parse_selector(&text) {
            Ok(sel) => Some(Rc::new(sel)),
            Err(e) => {
                self.diagnostics
                    .push(format!("selmatch: ignoring selector '{text}': {e}"));
                None
            }
        };
        self.selectors.insert(source.to_vec(), parsed.clone());
        parsed
    }

    // ---- statements ----

    fn exec(&mut self, stmt: &Stmt, locals: &mut Vec<Var>) -> EResult<Flow> {
        self.tick()?;
        match stmt {
            Stmt::Nop => Ok(Flow::Normal),
            Stmt::Expr(e) => {
                self.eval(e, locals)?;
                Ok(Flow::Normal)
            }
            Stmt::Print(args) => {
                self.do_print(args, locals)?;
                Ok(Flow::Normal)
            }
            Stmt::Printf(args) => {
                self.do_printf(args, locals)?;
                Ok(Flow::Normal)
            }
            Stmt::Block(body) => {
                for s in body {
                    match self.exec(s, locals)? {
                        Flow::Normal => {}
                        other => return Ok(other),
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::If(cond, then_branch, else_branch) => {
                if self.eval(cond, locals)?.truthy() {
                    self.exec(then_branch, locals)
                } else if let Some(e) = else_branch {
                    self.exec(e, locals)
                } else {
                    Ok(Flow::Normal)
                }
            }
            Stmt::While(cond, body) => {
                while self.eval(cond, locals)?.truthy() {
                    match self.exec(body, locals)? {
                        Flow::Normal | Flow::Continue => {}
                        Flow::Break => break,
                        ret @ Flow::Return(_) => return Ok(ret),
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::DoWhile(body, cond) => {
                loop {
                    match self.exec(body, locals)? {
                        Flow::Normal | Flow::Continue => {}
                        Flow::Break => break,
                        ret @ Flow::Return(_) => return Ok(ret),
                    }
                    if !self.eval(cond, locals)?.truthy() {
                        break;
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::For {
                init,
                cond,
                update,
                body,
            } => {
                if let Some(i) = init {
                    self.exec(i, locals)?;
                }
                loop {
                    if let Some(c) = cond {
                        if !self.eval(c, locals)?.truthy() {
                            break;
                        }
                    } else {
                        self.tick()?;
                    }
                    match self.exec(body, locals)? {
                        Flow::Normal | Flow::Continue => {}
                        Flow::Break => break,
                        ret @ Flow::Return(_) => return Ok(ret),
                    }
                    if let Some(u) = update {
                        self.exec(u, locals)?;
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::ForIn { var, array, body } => {
                let arr = self.get_array(*array, locals)?;
                let keys: Vec<Vec<u8>> = arr.borrow().keys().cloned().collect();
                for key in keys {
                    self.set_scalar(*var, Scalar::field(key), locals)?;
                    match self.exec(body, locals)? {
                        Flow::Normal | Flow::Continue => {}
                        Flow::Break => break,
                        ret @ Flow::Return(_) => return Ok(ret),
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::Break => Ok(Flow::Break),
            Stmt::Continue => Ok(Flow::Continue),
            Stmt::Return(value) => {
                let v = match value {
                    Some(e) => self.eval(e, locals)?,
                    None => Scalar::Uninit,
                };
                Ok(Flow::Return(v))
            }
            Stmt::Exit(status) => {
                let code = match status {
                    Some(e) => to_i32_clamped(self.eval(e, locals)?.to_num()) as i32,
                    None => 0,
                };
                Err(Abort::Exit(code))
            }
            Stmt::Delete { array, subscript } => {
                let arr = self.get_array(*array, locals)?;
                if subscript.is_empty() {
                    arr.borrow_mut().clear();
                } else {
                    let key = self.subscript(subscript, locals)?;
                    arr.borrow_mut().remove(&key);
                }
                Ok(Flow::Normal)
            }
        }
    }

    fn push_output(&mut self, bytes: &[u8]) -> EResult<()> {
        self.stdout.extend_from_slice(bytes);
        if self.stdout.len() > self.limits.max_output_bytes {
            return Err(self.err("resource limit: output bytes"));
        }
        Ok(())
    }

    fn do_print(&mut self, args: &[Expr], locals: &mut Vec<Var>) -> EResult<()> {
        let ofmt = self.special_bytes(OFMT);
        let ofs = self.special_bytes(OFS);
        let ors = self.special_bytes(ORS);
        let mut line = Vec::new();
        for (i, arg) in args.iter().enumerate() {
            if i > 0 {
                line.extend_from_slice(&ofs);
            }
            let v = self.eval(arg, locals)?;
            line.extend_from_slice(&v.to_bytes(&ofmt));
        }
        line.extend_from_slice(&ors);
        self.push_output(&line)
    }

    fn do_printf(&mut self, args: &[Expr], locals: &mut Vec<Var>) -> EResult<()> {
        let convfmt = self.convfmt();
        let format = self.eval(&args[0], locals)?.to_bytes(&convfmt);
        let mut rest = Vec::with_capacity(args.len() - 1);
        for arg in &args[1..] {
            rest.push(self.eval(arg, locals)?);
        }
        let out = sprintf::sprintf(&format, &rest, &convfmt).map_err(|e| self.err(e))?;
        self.push_output(&out)
    }

    // ---- expressions ----

    fn eval(&mut self, expr: &Expr, locals: &mut Vec<Var>) -> EResult<Scalar> {
        self.tick()?;
        match expr {
            Expr::Num(n) => Ok(Scalar::Num(*n)),
            Expr::Str(s) => Ok(Scalar::Str(std::sync::Arc::clone(s))),
            Expr::Regex(idx) => {
                // A bare regex matches against the (empty) input record.
                let p = self.pattern(&PatternExpr::Literal(*idx), locals)?;
                Ok(Scalar::Num(if p.is_match(b"") { 1.0 } else { 0.0 }))
            }
            Expr::Var(var) => self.get_scalar(*var, locals),
            Expr::Index(var, subs) => {
                let key = self.subscript(subs, locals)?;
                let arr = self.get_array(*var, locals)?;
                let mut map = arr.borrow_mut();
                Ok(map.entry(key).or_insert(Scalar::Uninit).clone())
            }
            Expr::Assign(lv, rhs) => {
                let value = self.eval(rhs, locals)?;
                self.write_lvalue(lv, value.clone(), locals)?;
                Ok(value)
            }
            Expr::AugAssign(lv, op, rhs) => {
                let current = self.read_lvalue(lv, locals)?.to_num();
                let operand = self.eval(rhs, locals)?.to_num();
                let value = Scalar::Num(self.arith(*op, current, operand)?);
                self.write_lvalue(lv, value.clone(), locals)?;
                Ok(value)
            }
            Expr::IncDec {
                target,
                increment,
                prefix,
            } => {
                let old = self.read_lvalue(target, locals)?.to_num();
                let new = if *increment { old + 1.0 } else { old - 1.0 };
                self.write_lvalue(target, Scalar::Num(new), locals)?;
                Ok(Scalar::Num(if *prefix { new } else { old }))
            }
            Expr::Neg(e) => Ok(Scalar::Num(-self.eval(e, locals)?.to_num())),
            Expr::Pos(e) => Ok(Scalar::Num(self.eval(e, locals)?.to_num())),
            Expr::Not(e) => Ok(bool_num(!self.eval(e, locals)?.truthy())),
            Expr::Binary(op, a, b) => {
                let x = self.eval(a, locals)?.to_num();
                let y = self.eval(b, locals)?.to_num();
                Ok(Scalar::Num(self.arith(*op, x, y)?))
            }
            Expr::Compare(op, a, b) => {
                let x = self.eval(a, locals)?;
                let y = self.eval(b, locals)?;
                let ord = x.compare(&y, &self.convfmt());
                Ok(bool_num(match op {
                    CmpOp::Lt => ord.is_lt(),
                    CmpOp::Le => ord.is_le(),
                    CmpOp::Gt => ord.is_gt(),
                    CmpOp::Ge => ord.is_ge(),
                    CmpOp::Eq => ord.is_eq(),
                    CmpOp::Ne => ord.is_ne(),
                }))
            }
            Expr::Concat(a, b) => {
                let convfmt = self.convfmt();
                let x = self.eval(a, locals)?.to_bytes(&convfmt);
                let y = self.eval(b, locals)?.to_bytes(&convfmt);
                let mut out = Vec::with_capacity(x.len() + y.len());
                out.extend_from_slice(&x);
                out.extend_from_slice(&y);
                Ok(Scalar::Str(std::sync::Arc::new(out)))
            }
            Expr::And(a, b) => {
                if !self.eval(a, locals)?.truthy() {
                    return Ok(bool_num(false));
                }
                Ok(bool_num(self.eval(b, locals)?.truthy()))
            }
            Expr::Or(a, b) => {
                if self.eval(a, locals)?.truthy() {
                    return Ok(bool_num(true));
                }
                Ok(bool_num(self.eval(b, locals)?.truthy()))
            }
            Expr::Ternary(c, t, f) => {
                if self.eval(c, locals)?.truthy() {
                    self.eval(t, locals)
                } else {
                    self.eval(f, locals)
                }
            }
            Expr::Match {
                negated,
                subject,
                pattern,
            } => {
                let convfmt = self.convfmt();
                let s = self.eval(subject, locals)?.to_bytes(&convfmt);
                let p = self.pattern(pattern, locals)?;
                let matched = p.is_match(&s);
                Ok(bool_num(matched != *negated))
            }
            Expr::In { keys, array } => {
                let key = self.subscript(keys, locals)?;
                let arr = self.get_array(*array, locals)?;
                let present = arr.borrow().contains_key(&key);
                Ok(bool_num(present))
            }
            Expr::Call { func, args } => self.call(*func, args, locals),
            Expr::Builtin { which, args } => self.builtin(*which, args, locals),
            Expr::BareLength => Ok(Scalar::Num(0.0)),
            Expr::Split {
                string,
                array,
                separator,
            } => {
                let convfmt = self.convfmt();
                let subject = self.eval(string, locals)?.to_bytes(&convfmt);
                let mode = self.split_mode(separator.as_deref(), locals)?;
                let arr = self.get_array(*array, locals)?;
                let fields = self.split_fields(&subject, &mode)?;
                let mut map = arr.borrow_mut();
                map.clear();
                let count = fields.len();
                for (i, field) in fields.into_iter().enumerate() {
                    map.insert((i + 1).to_string().into_bytes(), Scalar::field(field));
                }
                Ok(Scalar::Num(count as f64))
            }
            Expr::SubGsub {
                global,
                pattern,
                replacement,
                target,
            } => self.do_subgsub(*global, pattern, replacement, target, locals),
            Expr::MatchFn { subject, pattern } => {
                let convfmt = self.convfmt();
                let s = self.eval(subject, locals)?.to_bytes(&convfmt);
                let p = self.pattern(pattern, locals)?;
                let (rstart, rlength) = match p.find(&s) {
                    Some((start, end)) => ((start + 1) as f64, (end - start) as f64),
                    None => (0.0, -1.0),
                };
                self.globals[RSTART] = Var::Scalar(Scalar::Num(rstart));
                self.globals[RLENGTH] = Var::Scalar(Scalar::Num(rlength));
                Ok(Scalar::Num(rstart))
            }
        }
    }

    fn arith(&self, op: BinOp, x: f64, y: f64) -> EResult<f64> {
        Ok(match op {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div => {
                if y == 0.0 {
                    return Err(self.err("division by zero"));
                }
                x / y
            }
            BinOp::Mod => {
                if y == 0.0 {
                    return Err(self.err("division by zero in %"));
                }
                x % y
            }
            BinOp::Pow => x.powf(y),
        })
    }

    fn call(&mut self, func: usize, args: &[Expr], locals: &mut Vec<Var>) -> EResult<Scalar> {
        let function = &self.program.functions[func];
        if args.len() > function.params {
            return Err(self.err(format!(
                "function '{}' called with {} arguments but takes at most {}",
                function.name,
                args.len(),
                function.params
            )));
        }
        if self.depth >= 10_000 {
            return Err(self.err("recursion depth limit exceeded"));
        }
        let mut frame: Vec<Var> = Vec::with_capacity(function.params);
        for i in 0..function.params {
            let var = match args.get(i) {
                None => Var::Untyped,
                Some(arg) => match function.param_kinds[i] {
                    ParamKind::Array => match arg {
                        Expr::Var(r) => Var::Array(self.get_array(*r, locals)?),
                        _ => {
                            return Err(self.err(format!(
                                "argument {} of '{}' must be an array name",
                                i + 1,
                                self.program.functions[func].name
                            )))
                        }
                    },
                    ParamKind::Scalar => Var::Scalar(self.eval(arg, locals)?),
                    ParamKind::Unknown => match arg {
                        // An unused parameter still accepts either kind;
                        // pass arrays through, copy scalars.
                        Expr::Var(r) if matches!(self.peek_var(*r, locals), Var::Array(_)) => {
                            Var::Array(self.get_array(*r, locals)?)
                        }
                        _ => Var::Scalar(self.eval(arg, locals)?),
                    },
                },
            };
            frame.push(var);
        }
        self.depth += 1;
        let result = (|| {
            let function = &self.program.functions[func];
            for stmt in &function.body {
                match self.exec(stmt, &mut frame)? {
                    Flow::Normal => {}
                    Flow::Return(v) => return Ok(v),
                    Flow::Break | Flow::Continue => {
                        return Err(self.err("break/continue outside a loop"))
                    }
                }
            }
            Ok(Scalar::Uninit)
        })();
        self.depth -= 1;
        result
    }

    // ---- split / sub / gsub ----

    fn split_mode(
        &mut self,
        separator: Option<&PatternExpr>,
        locals: &mut Vec<Var>,
    ) -> EResult<SplitMode> {
        match separator {
            Some(PatternExpr::Literal(idx)) => {
                let p = self.pattern(&PatternExpr::Literal(*idx), locals)?;
                Ok(SplitMode::Regex(p))
            }
            Some(PatternExpr::Dynamic(expr)) => {
                let convfmt = self.convfmt();
                let bytes = self.eval(expr, locals)?.to_bytes(&convfmt);
                self.fs_mode(&bytes)
            }
            None => {
                let fs = self.special_bytes(FS);
                self.fs_mode(&fs)
            }
        }
    }

    fn fs_mode(&mut self, fs: &[u8]) -> EResult<SplitMode> {
        match fs {
            b" " => Ok(SplitMode::Whitespace),
            b"" => Ok(SplitMode::Chars),
            [single] => Ok(SplitMode::Byte(*single)),
            multi => {
                let bytes = multi.to_vec();
                if let Some(p) = self.dynamic_patterns.get(&bytes) {
                    return Ok(SplitMode::Regex(Rc::clone(p)));
                }
                let compiled = Pattern::compile(&bytes).map_err(|e| {
                    self.err(format!(
                        "bad field separator '{}': {e}",
                        String::from_utf8_lossy(&bytes)
                    ))
                })?;
                let rc = Rc::new(compiled);
                self.dynamic_patterns.insert(bytes, Rc::clone(&rc));
                Ok(SplitMode::Regex(rc))
            }
        }
    }

    fn split_fields(&mut self, s: &[u8], mode: &SplitMode) -> EResult<Vec<Vec<u8>>> {
        if s.is_empty() {
            return Ok(Vec::new());
        }
        Ok(match mode {
            SplitMode::Whitespace => s
                .split(|b| matches!(b, b' ' | b'\t' | b'\n'))
                .filter(|f| !f.is_empty())
                .map(|f| f.to_vec())
                .collect(),
            SplitMode::Byte(sep) => s.split(|b| b == sep).map(|f| f.to_vec()).collect(),
            SplitMode::Chars => s.iter().map(|b| vec![*b]).collect(),
            SplitMode::Regex(p) => {
                let mut fields = Vec::new();
                let mut field_start = 0usize;
                let mut pos = 0usize;
                while pos < s.len() {
                    self.tick()?;
                    match p.find_from(s, pos) {
                        None => break,
                        Some((ms, me)) if me > ms => {
                            fields.push(s[field_start..ms].to_vec());
                            field_start = me;
                            pos = me;
                        }
                        Some((ms, _)) => {
                            if ms >= s.len() {
                                break;
                            }
                            if ms > field_start {
                                fields.push(s[field_start..ms].to_vec());
                                field_start = ms;
                            }
                            pos = ms + 1;
                        }
                    }
                }
                fields.push(s[field_start..].to_vec());
                fields
            }
        })
    }

    fn do_subgsub(
        &mut self,
        global: bool,
        pattern: &PatternExpr,
        replacement: &Expr,
        target: &LValue,
        locals: &mut Vec<Var>,
    ) -> EResult<Scalar> {
        let convfmt = self.convfmt();
        let repl = self.eval(replacement, locals)?.to_bytes(&convfmt);
        let p = self.pattern(pattern, locals)?;
        let subject = self.read_lvalue(target, locals)?.to_bytes(&convfmt);
        let s: &[u8] = &subject;
        let mut out = Vec::with_capacity(s.len());
        let mut count = 0usize;
        let mut pos = 0usize;
        loop {
            self.tick()?;
            if !global && count == 1 {
                break;
            }
            let Some((ms, me)) = p.find_from(s, pos) else { break };
            out.extend_from_slice(&s[pos..ms]);
            expand_replacement(&repl, &s[ms..me], &mut out);
            count += 1;
            if me > ms {
                pos = me;
            } else {
                if ms >= s.len() {
                    pos = ms;
                    break;
                }
                out.push(s[ms]);
                pos = ms + 1;
            }
        }
        out.extend_from_slice(&s[pos..]);
        if count > 0 {
            self.write_lvalue(target, Scalar::Str(std::sync::Arc::new(out)), locals)?;
        }
        Ok(Scalar::Num(count as f64))
    }

    // ---- built-ins ----

    fn node_arg(&mut self, expr: &Expr, locals: &mut Vec<Var>) -> EResult<Option<u32>> {
        let n = self.eval(expr, locals)?.to_num();
        let id = n.trunc();
        if id < 1.0 || id > self.tree.node_count() as f64 {
            Ok(None)
        } else {
            Ok(Some(id as u32))
        }
    }

    fn builtin(&mut self, which: Builtin, args: &[Expr], locals: &mut Vec<Var>) -> EResult<Scalar> {
        match which {
            Builtin::Length => {
                let Some(arg) = args.first() else {
                    return Ok(Scalar::Num(0.0));
                };
                if let Expr::Var(r) = arg {
                    if let Var::Array(a) = self.peek_var(*r, locals) {
                        let n = a.borrow().len();
                        return Ok(Scalar::Num(n as f64));
                    }
                }
                let convfmt = self.convfmt();
                let bytes = self.eval(arg, locals)?.to_bytes(&convfmt);
                Ok(Scalar::Num(bytes.len() as f64))
            }
            Builtin::Substr => {
                let convfmt = self.convfmt();
                let s = self.eval(&args[0], locals)?.to_bytes(&convfmt);
                let m = self.eval(&args[1], locals)?.to_num().trunc();
                let n = match args.get(2) {
                    Some(e) => Some(self.eval(e, locals)?.to_num().trunc()),
                    None => None,
                };
                Ok(Scalar::Str(std::sync::Arc::new(substr(&s, m, n))))
            }
            Builtin::Index => {
                let convfmt = self.convfmt();
                let hay = self.eval(&args[0], locals)?.to_bytes(&convfmt);
                let needle = self.eval(&args[1], locals)?.to_bytes(&convfmt);
                if needle.is_empty() {
                    return Ok(Scalar::Num(1.0));
                }
                let found = hay
                    .windows(needle.len())
                    .position(|w| w == needle.as_slice())
                    .map(|p| (p + 1) as f64)
                    .unwrap_or(0.0);
                Ok(Scalar::Num(found))
            }
            Builtin::Sprintf => {
                let convfmt = self.convfmt();
                let format = self.eval(&args[0], locals)?.to_bytes(&convfmt);
                let mut rest = Vec::with_capacity(args.len() - 1);
                for arg in &args[1..] {
                    rest.push(self.eval(arg, locals)?);
                }
                let out =
                    sprintf::sprintf(&format, &rest, &convfmt).map_err(|e| self.err(e))?;
                Ok(Scalar::Str(std::sync::Arc::new(out)))
            }
            Builtin::Tolower | Builtin::Toupper => {
                let convfmt = self.convfmt();
                let bytes = self.eval(&args[0], locals)?.to_bytes(&convfmt);
                let out: Vec<u8> = if which == Builtin::Tolower {
                    bytes.iter().map(|b| b.to_ascii_lowercase()).collect()
                } else {
                    bytes.iter().map(|b| b.to_ascii_uppercase()).collect()
                };
                Ok(Scalar::Str(std::sync::Arc::new(out)))
            }
            Builtin::Int => {
                let n = self.eval(&args[0], locals)?.to_num();
                Ok(Scalar::Num(n.trunc()))
            }
            Builtin::Root => Ok(Scalar::Num(1.0)),
            Builtin::Parent | Builtin::Sister | Builtin::Children => {
                let axis = match which {
                    Builtin::Parent => Axis::Parent,
                    Builtin::Sister => Axis::Sister,
                    _ => Axis::Children,
                };
                let id = match self.node_arg(&args[0], locals)? {
                    Some(id) => self.tree.nav(id, axis),
                    None => 0,
                };
                Ok(Scalar::Num(id as f64))
            }
            Builtin::Type => match self.node_arg(&args[0], locals)? {
                Some(id) => Ok(Scalar::str(self.tree.inspect_type(id))),
                None => Ok(Scalar::Uninit),
            },
            Builtin::Name => match self.node_arg(&args[0], locals)? {
                Some(id) => Ok(Scalar::str(self.tree.inspect_name(id))),
                None => Ok(Scalar::Uninit),
            },
            Builtin::Text => match self.node_arg(&args[0], locals)? {
                Some(id) => Ok(Scalar::str(self.tree.inspect_text(id))),
                None => Ok(Scalar::Uninit),
            },
            Builtin::Attr => {
                let node = self.node_arg(&args[0], locals)?;
                let convfmt = self.convfmt();
                let attr_name = self.eval(&args[1], locals)?.to_bytes(&convfmt);
                match node {
                    Some(id) => {
                        let name = String::from_utf8_lossy(&attr_name).into_owned();
                        Ok(Scalar::str(self.tree.inspect_attr(id, &name)))
                    }
                    None => Ok(Scalar::Uninit),
                }
            }
            Builtin::Selmatch => {
                let node = self.node_arg(&args[0], locals)?;
                let convfmt = self.convfmt();
                let source = self.eval(&args[1], locals)?.to_bytes(&convfmt);
                let Some(node) = node else {
                    return Ok(Scalar::Num(0.0));
                };
                match self.selector(&source) {
                    Some(sel) => Ok(bool_num(sel.matches(self.tree, node))),
                    None => Ok(Scalar::Num(0.0)),
                }
            }
            Builtin::Seconds => {
                let convfmt = self.convfmt();
                let input = self.eval(&args[0], locals)?.to_bytes(&convfmt);
                match super::seconds::seconds(&input) {
                    Some(s) => Ok(Scalar::str(s)),
                    None => Ok(Scalar::str("")),
                }
            }
        }
    }
}

fn bool_num(b: bool) -> Scalar {
    Scalar::Num(if b { 1.0 } else { 0.0 })
}

/// POSIX substr: characters at positions [m, m+n-1] intersected with
/// [1, length]; no characters when the window is empty.
fn substr(s: &[u8], m: f64, n: Option<f64>) -> Vec<u8> {
    let len = s.len() as f64;
    let start = m.max(1.0);
    let end_excl = match n {
        None => len + 1.0,
        Some(n) => m + n,
    };
    let end_excl = end_excl.min(len + 1.0);
    if end_excl <= start || start > len {
        return Vec::new();
    }
    let a = (start as usize) - 1;
    let b = (end_excl as usize) - 1;
    s[a..b].to_vec()
}

/// `&` inserts the matched text; `\&` a literal ampersand; `\\` a
/// backslash. Any other escape passes through.
fn expand_replacement(repl: &[u8], matched: &[u8], out: &mut Vec<u8>) {
    let mut i = 0;
    while i < repl.len() {
        match repl[i] {
            b'\\' if i + 1 < repl.len() && repl[i + 1] == b'&' => {
                out.push(b'&');
                i += 2;
            }
            b'\\' if i + 1 < repl.len() && repl[i + 1] == b'\\' => {
                out.push(b'\\');
                i += 2;
            }
            b'&' => {
                out.extend_from_slice(matched);
                i += 1;
            }
            b => {
                out.push(b);
                i += 1;
            }
        }
    }
}

