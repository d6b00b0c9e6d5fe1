//! Syntax tree for compiled Hex programs.

use super::value::Bytes;

/// Where a name resolves: a global slot or a local slot in the current
/// function frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRef {
    Global(usize),
    Local(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone)]
pub enum LValue {
    Var(VarRef),
    Index(VarRef, Vec<Expr>),
}

/// Built-ins with ordinary call-by-value arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Length,
    Substr,
    Index,
    Sprintf,
    Tolower,
    Toupper,
    Int,
    // DOM access
    Root,
    Parent,
    Sister,
    Children,
    Type,
    Name,
    Text,
    Attr,
    Selmatch,
    Seconds,
}

impl Builtin {
    pub fn lookup(name: &str) -> Option<Builtin> {
        Some(match name {
            "length" => Builtin::Length,
            "substr" => Builtin::Substr,
            "index" => Builtin::Index,
            "sprintf" => Builtin::Sprintf,
            "tolower" => Builtin::Tolower,
            "toupper" => Builtin::Toupper,
            "int" => Builtin::Int,
            "root" => Builtin::Root,
            "parent" => Builtin::Parent,
            "sister" => Builtin::Sister,
            "children" => Builtin::Children,
            "type" => Builtin::Type,
            "name" => Builtin::Name,
            "text" => Builtin::Text,
            "attr" => Builtin::Attr,
            "selmatch" => Builtin::Selmatch,
            "seconds" => Builtin::Seconds,
            _ => return None,
        })
    }

    pub fn arity(&self) -> (usize, usize) {
        match self {
            Builtin::Length => (0, 1),
            Builtin::Substr => (2, 3),
            Builtin::Index => (2, 2),
            Builtin::Sprintf => (1, usize::MAX),
            Builtin::Tolower | Builtin::Toupper | Builtin::Int => (1, 1),
            Builtin::Root => (0, 0),
            Builtin::Parent | Builtin::Sister | Builtin::Children => (1, 1),
            Builtin::Type | Builtin::Name | Builtin::Text => (1, 1),
            Builtin::Attr | Builtin::Selmatch => (2, 2),
            Builtin::Seconds => (1, 1),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Str(Bytes),
    /// Regex literal evaluated as a value: 1 if it matches the (always
    /// empty) input record.
    Regex(usize),
    Var(VarRef),
    Index(VarRef, Vec<Expr>),
    Assign(LValue, Box<Expr>),
    AugAssign(LValue, BinOp, Box<Expr>),
    IncDec {
        target: LValue,
        increment: bool,
        prefix: bool,
    },
    Neg(Box<Expr>),
    Pos(Box<Expr>),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Compare(CmpOp, Box<Expr>, Box<Expr>),
    Concat(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    /// `subject ~ pattern` / `subject !~ pattern`.
    Match {
        negated: bool,
        subject: Box<Expr>,
        pattern: Box<PatternExpr>,
    },
    /// `(k1, k2) in array` / `k in array`.
    In {
        keys: Vec<Expr>,
        array: VarRef,
    },
    /// User function call; index resolved after parsing.
    Call {
        func: usize,
        args: Vec<Expr>,
    },
    Builtin {
        which: Builtin,
        args: Vec<Expr>,
    },
    /// `length` with no parentheses (length of the empty record).
    BareLength,
    Split {
        string: Box<Expr>,
        array: VarRef,
        separator: Option<Box<PatternExpr>>,
    },
    SubGsub {
        global: bool,
        pattern: Box<PatternExpr>,
        replacement: Box<Expr>,
        target: LValue,
    },
    MatchFn {
        subject: Box<Expr>,
        pattern: Box<PatternExpr>,
    },
}

/// A pattern operand: a compiled regex literal or a dynamic expression
/// compiled (and cached) at use time.
#[derive(Debug, Clone)]
pub enum PatternExpr {
    Literal(usize),
    Dynamic(Expr),
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Expr(Expr),
    Print(Vec<Expr>),
    Printf(Vec<Expr>),
    Block(Vec<Stmt>),
    If(Expr, Box<Stmt>, Option<Box<Stmt>>),
    While(Expr, Box<Stmt>),
    DoWhile(Box<Stmt>, Expr),
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        update: Option<Box<Stmt>>,
        body: Box<Stmt>,
    },
    ForIn {
        var: VarRef,
        array: VarRef,
        body: Box<Stmt>,
    },
    Break,
    Continue,
    Return(Option<Expr>),
    Exit(Option<Expr>),
    Delete {
        array: VarRef,
        subscript: Vec<Expr>,
    },
    Nop,
}

/// How a function parameter is used in its body, decided statically so
/// call sites know whether to pass by value or by array reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Unknown,
    Scalar,
    Array,
}

#[derive(Debug, Clone)]
pub struct Function {
    pub name: String,
    pub params: usize,
    pub param_kinds: Vec<ParamKind>,
    pub body: Vec<Stmt>,
}
